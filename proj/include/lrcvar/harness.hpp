#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lrcvar/envs.hpp"
#include "lrcvar/json_io.hpp"
#include "lrcvar/learner.hpp"
#include "lrcvar/oracle.hpp"

namespace lrcvar {

struct EnvSpec {
    enum class Kind { MachineReplacement, EnergyStorage, ModelFile };
    Kind kind = Kind::MachineReplacement;
    MachineReplacementParams machine{};
    EnergyParams energy{};
    std::filesystem::path model_path;
};

struct ExperimentConfig {
    EnvSpec env;
    Algorithm algorithm = Algorithm::CRL;
    double lambda = 0.0;
    double phi = 0.9;
    std::int64_t total_epochs = 1'000'000;
    std::int64_t warmup_epochs = 1000;
    int replications = 30;
    std::uint64_t base_seed = 20240601;
    ScheduleParams schedule{};
    int reference_state = 0;
    int initial_state = 0;
    std::optional<RandomizedPolicy> initial_policy;
    int checkpoint_count = 50;
    std::vector<std::int64_t> checkpoint_epochs; ///< overrides checkpoint_count when nonempty
    std::pair<std::int64_t, std::int64_t> rate_window{10'000, 1'000'000};
    std::filesystem::path output_dir = "out";
    int threads = 0; ///< 0: hardware concurrency

    /// lambda used by the oracle certificate: the configured lambda for MCRL, 0 otherwise.
    double certificate_lambda() const { return algorithm == Algorithm::MCRL ? lambda : 0.0; }
};

/// Parses a config document; defaults follow the benchmark settings of the chosen environment.
ExperimentConfig config_from_json(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
json to_json(const ExperimentConfig& config);
void validate(const ExperimentConfig& config);

MdpModel build_model(const EnvSpec& env);
LearnerConfig learner_config(const ExperimentConfig& config);
std::vector<std::int64_t> checkpoint_schedule(const ExperimentConfig& config);

/// Model plus exact optimum, shared read-only by every replication.
struct ExperimentContext {
    MdpModel model;
    OptimumResult optimum;
};

ExperimentContext make_context(const ExperimentConfig& config);

struct CheckpointRecord {
    std::int64_t epoch = 0;
    double running_cvar = 0.0;
    double v = 0.0;
    double max_abs_q = 0.0;
    DeterministicPolicy greedy_policy;
    bool greedy_evaluable = false;
    double greedy_var = 0.0;
    double greedy_cvar = 0.0;
    double greedy_mean = 0.0;
    double gap = 0.0;
    double policy_distance = 0.0;
};

using MetricsSeries = std::vector<CheckpointRecord>;

struct ReplicationResult {
    int index = 0;
    std::uint64_t seed = 0;
    MetricsSeries series;
    DeterministicPolicy final_policy;
    PolicyEvaluation final_evaluation;
    bool locally_optimal = false;       ///< certificate at tol 1e-6
    bool locally_optimal_loose = false; ///< certificate at tol 1e-3
    bool matches_optimum = false;
    std::string reference; ///< "oracle_optimum" or "final_greedy"
};

std::uint64_t replication_seed(std::uint64_t base_seed, int index);

ReplicationResult run_replication(const ExperimentConfig& config, const ExperimentContext& context, std::uint64_t seed,
                                  int index = 0);
ReplicationResult run_replication(const ExperimentConfig& config, std::uint64_t seed);

struct MeanWithError {
    double mean = 0.0;
    double stderr_ = 0.0;
};

struct SeriesMeanRecord {
    std::int64_t epoch = 0;
    double running_cvar = 0.0;
    double greedy_var = 0.0;
    double greedy_cvar = 0.0;
    double greedy_mean = 0.0;
    double gap = 0.0;
    double policy_distance = 0.0;
    int evaluable = 0;
};

struct ExperimentReport {
    ExperimentConfig config;
    OptimumResult optimum;
    std::vector<ReplicationResult> replications;
    std::vector<std::pair<int, std::string>> failures;
    MeanWithError final_var;
    MeanWithError final_cvar;
    MeanWithError final_mean;
    int locally_optimal_count = 0;
    int locally_optimal_loose_count = 0;
    std::vector<SeriesMeanRecord> series_mean;
    std::optional<double> rate_slope;
};

ExperimentReport run_experiment(const ExperimentConfig& config);
ExperimentReport run_experiment(const ExperimentConfig& config, const ExperimentContext& context);

/// (value - optimum) / |optimum|
double compute_gap(double value, double optimum);

/// Least-squares slope of log(distance) against log(epoch) over points inside `window`.
double fit_rate(const std::vector<std::pair<double, double>>& series, std::pair<double, double> window);

/// sum over states of ||d(s) - onehot(reference(s))||_2
double policy_distance(const RandomizedPolicy& d, const DeterministicPolicy& reference);

std::string format_csv(const MetricsSeries& series);
std::string format_csv(const std::vector<SeriesMeanRecord>& series);
void emit_csv(const MetricsSeries& series, const std::filesystem::path& path);
void emit_csv(const std::vector<SeriesMeanRecord>& series, const std::filesystem::path& path);

json summary_json(const ExperimentReport& report);
/// summary.json, rep_<i>.csv, series_mean.csv
void write_outputs(const ExperimentReport& report, const std::filesystem::path& dir);

} // namespace lrcvar
