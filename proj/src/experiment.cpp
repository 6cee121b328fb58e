#include "spai/experiment.hpp"

#include "spai/error.hpp"
#include "spai/graph.hpp"
#include "spai/io_util.hpp"
#include "spai/pcg.hpp"

#include <atomic>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

namespace spai {

void ExperimentConfig::override_seed(std::uint64_t s) {
    seed = s;
    dataset.seed = s;
    model.seed = s;
    train.seed = s;
}

namespace {

std::vector<PreconditionerKind> kinds_from_json(const nlohmann::json& j) {
    std::vector<PreconditionerKind> out;
    for (const auto& v : j) out.push_back(parse_preconditioner_kind(v.get<std::string>()));
    return out;
}

nlohmann::json kinds_to_json(const std::vector<PreconditionerKind>& kinds) {
    auto j = nlohmann::json::array();
    for (auto k : kinds) j.push_back(to_string(k));
    return j;
}

std::uint64_t split_seed(const DatasetSpec& spec) {
    return derive_seed(spec.seed, std::numeric_limits<std::uint64_t>::max());
}

void set_feature_dims(ExperimentConfig& cfg) {
    cfg.model.node_dim = cfg.dataset.family == Family::synthetic ? 2 : 3;
    cfg.model.edge_dim = 1;
}

} // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.seed = j.value("seed", c.seed);
    c.override_seed(c.seed);
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    c.threads = j.value("threads", c.threads);
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        if (d.contains("family")) c.dataset.family = parse_family(d.at("family").get<std::string>());
        c.dataset.count = d.value("count", c.dataset.count);
        c.dataset.seed = d.value("seed", c.dataset.seed);
        c.dataset.nx = d.value("nx", c.dataset.nx);
        c.dataset.ny = d.value("ny", c.dataset.ny);
        c.train_fraction = d.value("train_fraction", c.train_fraction);
        if (d.contains("root")) c.data_root = d.at("root").get<std::string>();
        if (d.contains("poisson")) {
            c.dataset.poisson.coeff_min = d["poisson"].value("coeff_min", c.dataset.poisson.coeff_min);
            c.dataset.poisson.coeff_max = d["poisson"].value("coeff_max", c.dataset.poisson.coeff_max);
        }
        if (d.contains("heat")) {
            c.dataset.heat.coeff_min = d["heat"].value("coeff_min", c.dataset.heat.coeff_min);
            c.dataset.heat.coeff_max = d["heat"].value("coeff_max", c.dataset.heat.coeff_max);
            c.dataset.heat.time_step = d["heat"].value("time_step", c.dataset.heat.time_step);
        }
        if (d.contains("synthetic")) {
            c.dataset.synthetic_n = d["synthetic"].value("n", c.dataset.synthetic_n);
            c.dataset.synthetic_density = d["synthetic"].value("density", c.dataset.synthetic_density);
            c.dataset.synthetic_epsilon = d["synthetic"].value("epsilon", c.dataset.synthetic_epsilon);
        }
    }
    if (j.contains("model")) c.model = gnn_config_from_json(j.at("model"), c.model);
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
    if (j.contains("bench")) {
        const auto& b = j.at("bench");
        if (b.contains("preconditioners")) c.bench_preconditioners = kinds_from_json(b.at("preconditioners"));
        if (b.contains("rtols")) c.bench_rtols = b.at("rtols").get<std::vector<double>>();
        if (b.contains("max_iters") && !b.at("max_iters").is_null()) c.bench_max_iters = b.at("max_iters").get<std::size_t>();
    }
    if (j.contains("spectral") && j.at("spectral").contains("preconditioners"))
        c.spectral_preconditioners = kinds_from_json(j.at("spectral").at("preconditioners"));
    if (j.contains("checkpoint")) c.checkpoint = j.at("checkpoint").get<std::string>();
    set_feature_dims(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    try {
        return config_from_json(nlohmann::json::parse(in, nullptr, true, true));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config " + path.string() + ": " + e.what());
    }
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["out"] = c.out.string();
    j["threads"] = c.threads;
    j["dataset"] = {{"family", to_string(c.dataset.family)},
                    {"count", c.dataset.count},
                    {"seed", c.dataset.seed},
                    {"nx", c.dataset.nx},
                    {"ny", c.dataset.ny},
                    {"train_fraction", c.train_fraction},
                    {"root", c.resolved_data_root().string()},
                    {"poisson", {{"coeff_min", c.dataset.poisson.coeff_min}, {"coeff_max", c.dataset.poisson.coeff_max}}},
                    {"heat",
                     {{"coeff_min", c.dataset.heat.coeff_min},
                      {"coeff_max", c.dataset.heat.coeff_max},
                      {"time_step", c.dataset.heat.time_step}}},
                    {"synthetic",
                     {{"n", c.dataset.synthetic_n},
                      {"density", c.dataset.synthetic_density},
                      {"epsilon", c.dataset.synthetic_epsilon}}}};
    j["model"] = to_json(c.model);
    j["train"] = to_json(c.train);
    j["bench"] = {{"preconditioners", kinds_to_json(c.bench_preconditioners)},
                  {"rtols", c.bench_rtols},
                  {"max_iters", c.bench_max_iters ? nlohmann::json(*c.bench_max_iters) : nlohmann::json(nullptr)}};
    j["spectral"] = {{"preconditioners", kinds_to_json(c.spectral_preconditioners)}};
    j["checkpoint"] = c.resolved_checkpoint().string();
    return j;
}

std::string matrix_id(const ProblemMeta& meta) { return std::string(to_string(meta.family)) + "/" + std::to_string(meta.seed); }

std::vector<Problem> load_or_generate(const ExperimentConfig& cfg) {
    std::vector<Problem> out;
    out.reserve(cfg.dataset.count);
    const auto root = cfg.resolved_data_root();
    for (std::size_t i = 0; i < cfg.dataset.count; ++i) {
        ProblemMeta probe;
        probe.family = cfg.dataset.family;
        probe.seed = instance_seed(cfg.dataset, i);
        const auto dir = instance_dir(root, probe);
        if (std::filesystem::exists(dir / "matrix.mtx") && std::filesystem::exists(dir / "meta.json"))
            out.push_back(read_instance(dir));
        else
            out.push_back(generate_instance(cfg.dataset, i));
    }
    return out;
}

TrainSample make_sample(const Problem& p) {
    return {p.matrix, build_graph(p.matrix, p.meta), gen_rhs(p.meta, p.meta.rhs_seed)};
}

GenerateSummary cmd_generate(const ExperimentConfig& cfg, std::ostream& log) {
    GenerateSummary s;
    s.min_n = std::numeric_limits<std::size_t>::max();
    const auto root = cfg.resolved_data_root();
    double density = 0.0;
    for (std::size_t i = 0; i < cfg.dataset.count; ++i) {
        const auto p = generate_instance(cfg.dataset, i);
        write_instance(root, p);
        s.min_n = std::min(s.min_n, p.meta.n);
        s.max_n = std::max(s.max_n, p.meta.n);
        density += p.meta.resulting_density;
        ++s.count;
    }
    if (s.count == 0) s.min_n = 0;
    s.mean_density = s.count ? density / static_cast<double>(s.count) : 0.0;
    log << "generated " << s.count << " " << to_string(cfg.dataset.family) << " instances under " << root.string()
        << "\n  n in [" << s.min_n << ", " << s.max_n << "], mean density " << s.mean_density << "\n";
    return s;
}

TrainLog cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
    const auto problems = load_or_generate(cfg);
    const auto split = make_split(problems.size(), split_seed(cfg.dataset), cfg.train_fraction);
    std::vector<TrainSample> train_set, val_set;
    for (auto i : split.train) train_set.push_back(make_sample(problems[i]));
    for (auto i : split.test) val_set.push_back(make_sample(problems[i]));

    std::filesystem::create_directories(cfg.out);
    auto model = init_model(cfg.model);
    log << "model parameters: " << model.parameter_count() << "\n";
    TrainConfig tc = cfg.train;
    tc.checkpoint_path = cfg.resolved_checkpoint();
    const auto tl = train(model, train_set, val_set, tc, [&](const EpochRecord& r) {
        if (r.epoch == 1 || r.epoch % 50 == 0 || r.epoch == tc.epochs)
            log << "epoch " << r.epoch << " loss " << r.mean_loss << " lr " << r.lr << " t " << r.wallclock << "s\n";
    });
    write_training_log(tl, cfg.out / "train_log.csv");
    write_validation_log(tl, cfg.out / "validation.csv");
    write_atomically(cfg.out / "config.json", [&](std::ostream& o) { o << to_json(cfg).dump(2) << '\n'; });
    if (tl.diverged) log << "training aborted: " << tl.diagnostic << "\n";
    else if (!tl.validation.empty()) log << "final validation mean iterations " << tl.validation.back().mean_iterations << "\n";
    return tl;
}

Preconditioner build_preconditioner(PreconditionerKind kind, const Problem& p, const GnnModel* model) {
    switch (kind) {
    case PreconditionerKind::none: return build_identity(p.matrix.rows());
    case PreconditionerKind::diag: return build_jacobi(p.matrix);
    case PreconditionerKind::ic0: return build_ic0(p.matrix);
    case PreconditionerKind::fsai: return build_fsai(p.matrix);
    case PreconditionerKind::learned: {
        if (!model) throw Error("learned preconditioner requested without a trained model");
        const auto t0 = std::chrono::steady_clock::now();
        const auto graph = build_graph(p.matrix, p.meta);
        auto fwd = forward(*model, graph);
        const auto m = build_learned_spai(std::move(fwd.g), model->config.epsilon);
        // Construction time covers feature extraction and the network forward.
        return Preconditioner(m.payload(), std::chrono::duration_cast<std::chrono::nanoseconds>(
                                               std::chrono::steady_clock::now() - t0));
    }
    }
    throw Error("unknown preconditioner kind");
}

namespace {

std::optional<GnnModel> model_if_needed(const ExperimentConfig& cfg, const std::vector<PreconditionerKind>& kinds) {
    for (auto k : kinds) {
        if (k != PreconditionerKind::learned) continue;
        const auto path = cfg.resolved_checkpoint();
        if (!std::filesystem::exists(path))
            throw Error("checkpoint " + path.string() + " not found: run train first or drop 'learned'");
        return read_checkpoint(path);
    }
    return std::nullopt;
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace

std::vector<BenchRow> cmd_bench(const ExperimentConfig& cfg, std::ostream& log) {
    const auto problems = load_or_generate(cfg);
    const auto split = make_split(problems.size(), split_seed(cfg.dataset), cfg.train_fraction);
    const auto model = model_if_needed(cfg, cfg.bench_preconditioners);
    const std::size_t per_matrix = cfg.bench_preconditioners.size() * cfg.bench_rtols.size();
    std::vector<BenchRow> rows(split.test.size() * per_matrix);

    parallel_for(split.test.size(), cfg.threads, [&](std::size_t t) {
        const auto& p = problems[split.test[t]];
        const auto b = gen_rhs(p.meta, p.meta.rhs_seed);
        std::size_t slot = t * per_matrix;
        for (auto kind : cfg.bench_preconditioners) {
            const auto m = build_preconditioner(kind, p, model ? &*model : nullptr);
            for (double rtol : cfg.bench_rtols) {
                SolveConfig sc;
                sc.rtol = rtol;
                sc.max_iters = cfg.bench_max_iters;
                BenchRow row;
                row.matrix_id = matrix_id(p.meta);
                row.preconditioner = kind;
                row.rtol = rtol;
                try {
                    const auto rep = pcg_solve(p.matrix, b, m, sc);
                    row.k = rep.iterations;
                    row.t_construct_ns = rep.t_construct.count();
                    row.t_apply_total_ns = rep.t_apply_total.count();
                    row.t_cg_total_ns = rep.t_cg_total.count();
                    row.converged = rep.converged;
                } catch (const NotPositiveDefinite&) {
                    row.t_construct_ns = m.construct_time().count();
                    row.converged = false;
                }
                rows[slot++] = row;
            }
        }
    });
    std::filesystem::create_directories(cfg.out);
    write_bench_csv(rows, cfg.out / "bench.csv");
    log << "bench: " << split.test.size() << " test matrices x " << cfg.bench_preconditioners.size()
        << " preconditioners x " << cfg.bench_rtols.size() << " tolerances -> " << (cfg.out / "bench.csv").string() << "\n";
    for (auto kind : cfg.bench_preconditioners) {
        double k_sum = 0.0;
        std::size_t cnt = 0;
        for (const auto& r : rows)
            if (r.preconditioner == kind && r.rtol == cfg.bench_rtols.back()) {
                k_sum += static_cast<double>(r.k);
                ++cnt;
            }
        if (cnt) log << "  " << to_string(kind) << ": mean k " << k_sum / static_cast<double>(cnt) << " at rtol "
                     << cfg.bench_rtols.back() << "\n";
    }
    return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path) {
    write_atomically(path, [&](std::ostream& out) {
        out << "matrix_id,preconditioner,rtol,k,t_construct_ns,t_apply_total_ns,t_cg_total_ns,converged\n";
        for (const auto& r : rows)
            out << r.matrix_id << ',' << to_string(r.preconditioner) << ',' << r.rtol << ',' << r.k << ','
                << r.t_construct_ns << ',' << r.t_apply_total_ns << ',' << r.t_cg_total_ns << ','
                << (r.converged ? "true" : "false") << '\n';
    });
}

std::vector<SpectralRow> cmd_spectral(const ExperimentConfig& cfg, std::ostream& log) {
    const auto problems = load_or_generate(cfg);
    const auto split = make_split(problems.size(), split_seed(cfg.dataset), cfg.train_fraction);
    const auto model = model_if_needed(cfg, cfg.spectral_preconditioners);
    const std::size_t per = cfg.spectral_preconditioners.size();
    std::vector<SpectralRow> rows(split.test.size() * per);
    parallel_for(split.test.size(), cfg.threads, [&](std::size_t t) {
        const auto& p = problems[split.test[t]];
        for (std::size_t k = 0; k < per; ++k) {
            const auto kind = cfg.spectral_preconditioners[k];
            const auto m = build_preconditioner(kind, p, model ? &*model : nullptr);
            rows[t * per + k] = {matrix_id(p.meta), kind,
                                 error_bound_check(p.matrix, [&m](std::span<const double> r, std::span<double> s) {
                                     m.apply(r, s);
                                 })};
        }
    });
    std::filesystem::create_directories(cfg.out);
    write_atomically(cfg.out / "spectral.jsonl", [&](std::ostream& out) {
        for (const auto& r : rows) {
            auto j = to_json(r.report);
            j["matrix_id"] = r.matrix_id;
            j["preconditioner"] = to_string(r.preconditioner);
            out << j.dump() << '\n';
        }
    });
    log << "spectral: " << rows.size() << " records -> " << (cfg.out / "spectral.jsonl").string() << "\n";
    return rows;
}

bool cmd_verify(const ExperimentConfig& cfg, std::ostream& log) {
    bool ok = true;
    for (const auto& c : run_verify_suite(cfg.seed)) {
        log << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        ok = ok && c.passed;
    }
    log << (ok ? "all checks passed" : "verification FAILED") << "\n";
    return ok;
}

} // namespace spai
