#pragma once

#include "spai/adamw.hpp"
#include "spai/gnn.hpp"
#include "spai/graph.hpp"
#include "spai/loss.hpp"
#include "spai/sparse.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace spai {

struct TrainConfig {
    std::size_t epochs = 500;
    std::size_t batch_size = 4;
    double lr = 1e-3;
    double weight_decay = 1e-2;
    double lr_decay = 0.99;
    std::size_t hutchinson_samples_per_matrix = 1;
    std::uint64_t seed = 0;
    LossNorm loss_norm = LossNorm::mean_abs;
    /// Validation PCG runs every this many epochs (and after the last); 0 disables.
    std::size_t validate_every = 50;
    double validation_rtol = 1e-8;
    /// Checkpoint every this many epochs when checkpoint_path is set; 0 writes only at the end.
    std::size_t checkpoint_every = 0;
    std::optional<std::filesystem::path> checkpoint_path;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct TrainSample {
    SparseMatrix a;
    MatrixGraph graph;
    std::vector<double> rhs;  ///< used for validation solves
};

struct EpochRecord {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double lr = 0.0;
    double wallclock = 0.0;  ///< seconds since training started
};

struct ValidationRecord {
    std::size_t epoch = 0;
    double mean_iterations = 0.0;
    std::size_t failures = 0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::vector<ValidationRecord> validation;
    bool diverged = false;
    std::string diagnostic;
};

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

/// One SAI loss sample with its parameter gradient (forward, loss, backward).
LossAndGrad loss_and_gradient(const GnnModel& model, const TrainSample& sample, std::span<const double> w,
                              LossNorm norm = LossNorm::mean_abs);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains in place. On a non-finite loss the model is restored to the parameters from before
/// the offending step, the last-good checkpoint is written if a path is configured, and the
/// log comes back with diverged set.
TrainLog train(GnnModel& model, const std::vector<TrainSample>& train_set, const std::vector<TrainSample>& validation_set,
               const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Mean PCG iteration count using the model's learned preconditioner.
ValidationRecord evaluate_iterations(const GnnModel& model, const std::vector<TrainSample>& samples, double rtol);

void write_training_log(const TrainLog& log, const std::filesystem::path& path);
void write_validation_log(const TrainLog& log, const std::filesystem::path& path);

} // namespace spai
