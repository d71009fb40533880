#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "enshrink/climatology.hpp"
#include "enshrink/filters.hpp"
#include "enshrink/metrics.hpp"
#include "enshrink/model.hpp"

namespace enshrink {

enum class ObservationKind { Identity, Square };

struct ClimatologySource {
  /// Load from a saved container instead of generating.
  std::optional<std::filesystem::path> path;
  int samples = 2000;
  double spinup_time = 10.0;
  int interval_steps = 1;
  std::uint64_t seed = 0;
  ClimatologyMode mode = ClimatologyMode::Trajectory;
  int members = 10000;
  std::optional<double> taper_radius;
};

/// One block of a sweep: the Cartesian product of its axes. Axes omitted in
/// the config document are filled with the template's single value.
struct SweepAxes {
  std::vector<FilterVariant> variant;
  std::vector<int> ensemble_size;
  std::vector<int> synthetic_size;
  std::vector<double> inflation;
  std::vector<GammaPolicy> gamma;
};

struct ExperimentConfig {
  std::string id = "experiment";
  ModelConfig model;
  int assimilation_steps = 2200;
  int spinup_steps = 200;
  double cycle = 0.05;  // time between analyses
  double truth_spinup_time = 10.0;
  double initial_spread = 1.0;
  ObservationKind observation = ObservationKind::Identity;
  /// One entry means σ²·I; otherwise the diagonal of R.
  std::vector<double> error_variance{1.0};
  double model_error_variance = 0.0;
  int ensemble_size = 5;
  FilterConfig filter;
  int replicates = 5;
  std::uint64_t base_seed = 1;
  /// 0-based index of the variable used for rank histograms.
  int rank_variable = 16;
  ClimatologySource climatology;
  std::vector<SweepAxes> sweep;

  int steps_per_cycle() const;
  void validate() const;
};

/// Independent random streams per replicate; changing one role's consumption
/// (e.g. a different synthetic size) leaves all other roles untouched.
enum class StreamRole : std::uint32_t {
  TruthAndObservations = 1,
  EnsembleInit = 2,
  Synthetic = 3,
  TieBreak = 4,
  ModelError = 5,
};

Rng make_stream(std::uint64_t base_seed, int replicate, StreamRole role);

struct RunMetrics {
  int replicate = 0;
  double rmse = 0.0;
  double kl = 0.0;
  double mean_gamma = 0.0;
  bool diverged = false;
  int diverged_at_step = -1;
  double error_norm = 0.0;
  RankHistogram histogram;
  std::vector<double> gamma_trace;  // one entry per scored step
};

struct Summary {
  double rmse_mean = 0.0, rmse_std = 0.0;
  double kl_mean = 0.0, kl_std = 0.0;
  double gamma_mean = 0.0, gamma_std = 0.0;
  int diverged = 0;
  double pooled_kl = 0.0;  // KL of the histogram accumulated over replicates
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunMetrics> runs;
  Summary summary;
  std::vector<double> gamma_trace;  // per scored step, mean over replicates
};

ObservationOperator make_observation_operator(const ExperimentConfig& cfg);
Matrix make_observation_error(const ExperimentConfig& cfg);
/// Periodic grid distance between state index j and the location of observation k.
DistanceFn make_distance(const ExperimentConfig& cfg, const ObservationOperator& h);

TargetCovariance obtain_climatology(const ExperimentConfig& cfg);

RunMetrics run_replicate(const ExperimentConfig& cfg, const TargetCovariance* climatology,
                         int replicate);

Summary summarize(const std::vector<RunMetrics>& runs);

/// All replicates of one configuration; `jobs` worker threads. The climatology
/// is generated (or loaded) when not supplied and a shrinkage variant needs it.
ExperimentResult run_twin_experiment(const ExperimentConfig& cfg, int jobs = 1,
                                     const TargetCovariance* climatology = nullptr);

/// Expands the sweep blocks of `cfg` into concrete cell configurations.
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg);

std::vector<ExperimentResult> sweep(const ExperimentConfig& cfg, int jobs = 1);

void write_runs_csv(std::ostream& out, const std::vector<ExperimentResult>& results);
void write_summary_csv(std::ostream& out, const std::vector<ExperimentResult>& results);
void write_gamma_csv(std::ostream& out, const std::vector<ExperimentResult>& results);

/// Writes <id>_runs.csv, <id>_summary.csv, <id>_gamma.csv and the resolved
/// <id>_config.json into `dir`.
void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                   const std::vector<ExperimentResult>& results);

// Config documents (JSON, schema_version 1). Unknown keys are errors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& cfg);

struct Preset {
  std::string name;
  std::string description;
  ExperimentConfig config;
};

const std::vector<Preset>& presets();
const Preset& find_preset(std::string_view name);

}  // namespace enshrink
