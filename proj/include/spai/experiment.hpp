#pragma once

#include "spai/datasets.hpp"
#include "spai/gnn.hpp"
#include "spai/precond.hpp"
#include "spai/spectral.hpp"
#include "spai/train.hpp"
#include "spai/verify.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace spai {

/// Everything a run needs. Sections that omit their own seed inherit the top-level one.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out = "runs/default";
    std::size_t threads = 1;

    DatasetSpec dataset;
    double train_fraction = 0.8;
    std::optional<std::filesystem::path> data_root;  ///< defaults to <out>/data

    GnnConfig model;
    TrainConfig train;

    std::vector<PreconditionerKind> bench_preconditioners{PreconditionerKind::none, PreconditionerKind::diag,
                                                          PreconditionerKind::ic0, PreconditionerKind::fsai,
                                                          PreconditionerKind::learned};
    std::vector<double> bench_rtols{1e-2, 1e-4, 1e-6, 1e-8};
    std::optional<std::size_t> bench_max_iters;
    std::vector<PreconditionerKind> spectral_preconditioners = bench_preconditioners;
    std::optional<std::filesystem::path> checkpoint;  ///< defaults to <out>/checkpoint.bin

    std::filesystem::path resolved_data_root() const { return data_root.value_or(out / "data"); }
    std::filesystem::path resolved_checkpoint() const { return checkpoint.value_or(out / "checkpoint.bin"); }
    /// Sets the top-level seed and every section seed.
    void override_seed(std::uint64_t s);
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Instances from the data root where present, generated from the config otherwise.
std::vector<Problem> load_or_generate(const ExperimentConfig& cfg);
TrainSample make_sample(const Problem& p);
std::string matrix_id(const ProblemMeta& meta);

struct GenerateSummary {
    std::size_t count = 0;
    std::size_t min_n = 0, max_n = 0;
    double mean_density = 0.0;
};
GenerateSummary cmd_generate(const ExperimentConfig& cfg, std::ostream& log);

TrainLog cmd_train(const ExperimentConfig& cfg, std::ostream& log);

struct BenchRow {
    std::string matrix_id;
    PreconditionerKind preconditioner = PreconditionerKind::none;
    double rtol = 0.0;
    std::size_t k = 0;
    std::int64_t t_construct_ns = 0;
    std::int64_t t_apply_total_ns = 0;
    std::int64_t t_cg_total_ns = 0;
    bool converged = false;
};
std::vector<BenchRow> cmd_bench(const ExperimentConfig& cfg, std::ostream& log);
void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path);

struct SpectralRow {
    std::string matrix_id;
    PreconditionerKind preconditioner = PreconditionerKind::none;
    ErrorBoundReport report;
};
std::vector<SpectralRow> cmd_spectral(const ExperimentConfig& cfg, std::ostream& log);

/// Runs the property suite; true when every check passed.
bool cmd_verify(const ExperimentConfig& cfg, std::ostream& log);

/// Builds any baseline, or the learned SPAI from `model` (required for learned).
Preconditioner build_preconditioner(PreconditionerKind kind, const Problem& p, const GnnModel* model);

} // namespace spai
