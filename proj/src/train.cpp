#include "spai/train.hpp"

#include "spai/error.hpp"
#include "spai/io_util.hpp"
#include "spai/pcg.hpp"
#include "spai/precond.hpp"
#include "spai/random.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

namespace spai {

void TrainConfig::validate() const {
    if (epochs == 0 || batch_size == 0 || hutchinson_samples_per_matrix == 0)
        throw Error("train: epochs, batch_size and hutchinson_samples_per_matrix must be positive");
    if (!(lr > 0.0) || weight_decay < 0.0) throw Error("train: lr must be positive and weight_decay nonnegative");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw Error("train: lr_decay must lie in (0, 1]");
}

nlohmann::json to_json(const TrainConfig& cfg) {
    nlohmann::json j{{"epochs", cfg.epochs},
                     {"batch_size", cfg.batch_size},
                     {"lr", cfg.lr},
                     {"weight_decay", cfg.weight_decay},
                     {"lr_decay", cfg.lr_decay},
                     {"hutchinson_samples_per_matrix", cfg.hutchinson_samples_per_matrix},
                     {"seed", cfg.seed},
                     {"loss_norm", to_string(cfg.loss_norm)},
                     {"validate_every", cfg.validate_every},
                     {"validation_rtol", cfg.validation_rtol},
                     {"checkpoint_every", cfg.checkpoint_every}};
    return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.hutchinson_samples_per_matrix = j.value("hutchinson_samples_per_matrix", c.hutchinson_samples_per_matrix);
    c.seed = j.value("seed", c.seed);
    if (j.contains("loss_norm")) c.loss_norm = parse_loss_norm(j.at("loss_norm").get<std::string>());
    c.validate_every = j.value("validate_every", c.validate_every);
    c.validation_rtol = j.value("validation_rtol", c.validation_rtol);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    return c;
}

LossAndGrad loss_and_gradient(const GnnModel& model, const TrainSample& sample, std::span<const double> w,
                              LossNorm norm) {
    ad::Tape tape;
    const auto tr = forward_on_tape(tape, model, sample.graph);
    const auto loss = sai_loss_on_tape(tape, sample.a, sample.graph.pattern, tr.edge_values, model.config.epsilon, w, norm);
    tape.finalize(loss);
    LossAndGrad out;
    out.loss = tape.scalar(loss);
    out.grad.assign(model.params.size(), 0.0);
    tape.backward(1.0, out.grad);
    return out;
}

ValidationRecord evaluate_iterations(const GnnModel& model, const std::vector<TrainSample>& samples, double rtol) {
    ValidationRecord rec;
    if (samples.empty()) return rec;
    double total = 0.0;
    SolveConfig sc;
    sc.rtol = rtol;
    for (const auto& s : samples) {
        auto fwd = forward(model, s.graph);
        const auto m = build_learned_spai(std::move(fwd.g), model.config.epsilon);
        try {
            const auto rep = pcg_solve(s.a, s.rhs, m, sc);
            total += static_cast<double>(rep.iterations);
            if (!rep.converged) ++rec.failures;
        } catch (const NotPositiveDefinite&) {
            total += static_cast<double>(sc.max_iters.value_or(20 * s.a.rows()));
            ++rec.failures;
        }
    }
    rec.mean_iterations = total / static_cast<double>(samples.size());
    return rec;
}

TrainLog train(GnnModel& model, const std::vector<TrainSample>& train_set, const std::vector<TrainSample>& validation_set,
               const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (train_set.empty()) throw Error("train: empty training set");
    TrainLog log;
    Rng order_rng(derive_seed(cfg.seed, 1));
    Rng probe_rng(derive_seed(cfg.seed, 2));
    AdamWState state;
    AdamWConfig opt{cfg.lr, cfg.weight_decay};
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> grad(model.params.size());
    std::vector<double> w;
    const auto start = std::chrono::steady_clock::now();

    auto maybe_checkpoint = [&](std::size_t epoch, bool last) {
        if (!cfg.checkpoint_path) return;
        if (last || (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0)) write_checkpoint(model, *cfg.checkpoint_path);
    };

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        long double epoch_loss = 0.0L;
        std::size_t visits = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            const double weight = 1.0 / static_cast<double>((b1 - b0) * cfg.hutchinson_samples_per_matrix);
            // Reduction in batch order keeps the sum bit-reproducible.
            for (std::size_t b = b0; b < b1; ++b) {
                const auto& s = train_set[order[b]];
                for (std::size_t h = 0; h < cfg.hutchinson_samples_per_matrix; ++h) {
                    w.resize(s.a.rows());
                    probe_rng.fill_normal(w);
                    const auto lg = loss_and_gradient(model, s, w, cfg.loss_norm);
                    batch_loss += lg.loss;
                    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += weight * lg.grad[k];
                }
            }
            bool finite = std::isfinite(batch_loss);
            for (std::size_t k = 0; finite && k < grad.size(); ++k) finite = std::isfinite(grad[k]);
            if (!finite) {
                std::ostringstream msg;
                msg << "non-finite loss or gradient at epoch " << epoch << ", batch starting at " << b0
                    << "; parameters restored to the last finite step";
                log.diverged = true;
                log.diagnostic = msg.str();
                maybe_checkpoint(epoch, true);
                return log;
            }
            const auto backup = model.params;
            adamw_step(model.params, grad, state, opt);
            bool params_finite = true;
            for (double p : model.params) params_finite = params_finite && std::isfinite(p);
            if (!params_finite) {
                model.params = backup;
                log.diverged = true;
                log.diagnostic = "non-finite parameters after optimizer step at epoch " + std::to_string(epoch);
                maybe_checkpoint(epoch, true);
                return log;
            }
            epoch_loss += batch_loss;
            visits += (b1 - b0) * cfg.hutchinson_samples_per_matrix;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_loss = static_cast<double>(epoch_loss / static_cast<long double>(visits));
        rec.lr = opt.lr;
        rec.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (!validation_set.empty() && cfg.validate_every > 0 &&
            (epoch % cfg.validate_every == 0 || epoch == cfg.epochs)) {
            auto v = evaluate_iterations(model, validation_set, cfg.validation_rtol);
            v.epoch = epoch;
            log.validation.push_back(v);
        }
        maybe_checkpoint(epoch, epoch == cfg.epochs);
        opt.lr *= cfg.lr_decay;
    }
    return log;
}

void write_training_log(const TrainLog& log, const std::filesystem::path& path) {
    write_atomically(path, [&](std::ostream& out) {
        out.precision(17);
        out << "epoch,mean_loss,lr,wallclock\n";
        for (const auto& r : log.epochs) out << r.epoch << ',' << r.mean_loss << ',' << r.lr << ',' << r.wallclock << '\n';
    });
}

void write_validation_log(const TrainLog& log, const std::filesystem::path& path) {
    write_atomically(path, [&](std::ostream& out) {
        out.precision(17);
        out << "epoch,mean_iterations,failures\n";
        for (const auto& r : log.validation) out << r.epoch << ',' << r.mean_iterations << ',' << r.failures << '\n';
    });
}

} // namespace spai
