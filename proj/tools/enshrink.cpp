#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "enshrink/errors.hpp"
#include "enshrink/experiment.hpp"

using namespace enshrink;

namespace {

struct Source {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::string climatology;
};

void add_source_options(CLI::App* cmd, Source& s) {
  auto* c = cmd->add_option("--config", s.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  auto* p = cmd->add_option("--preset", s.preset, "named preset, see `enshrink presets`");
  c->excludes(p);
  cmd->add_option("--seed", s.seed, "base seed (overrides the config)");
  cmd->add_option("--replicates", s.replicates, "replicate count (overrides the config)");
  cmd->add_option("--climatology", s.climatology, "saved climatology container to load");
}

ExperimentConfig resolve(const Source& s) {
  ExperimentConfig cfg;
  if (!s.config.empty()) cfg = load_config(s.config);
  else if (!s.preset.empty()) cfg = find_preset(s.preset).config;
  else throw Error(ErrorKind::Config, "either --config or --preset is required");
  if (s.seed) cfg.base_seed = *s.seed;
  if (s.replicates) cfg.replicates = *s.replicates;
  if (!s.climatology.empty()) cfg.climatology.path = s.climatology;
  cfg.validate();
  return cfg;
}

void print_summary(const std::vector<ExperimentResult>& results) {
  std::printf("%-18s %4s %4s %6s %-12s %10s %10s %10s %10s %9s\n", "variant", "N", "M", "alpha",
              "gamma", "rmse", "rmse_sd", "kl", "mean_gam", "diverged");
  for (const ExperimentResult& r : results) {
    const ExperimentConfig& c = r.config;
    const bool shrink = uses_shrinkage(c.filter.variant);
    std::printf("%-18s %4d %4d %6.3g %-12s %10.4g %10.4g %10.4g %10.4g %5d/%-3zu\n",
                std::string(to_string(c.filter.variant)).c_str(), c.ensemble_size,
                shrink ? c.filter.synthetic.size : 0, c.filter.inflation,
                shrink ? c.filter.gamma.label().c_str() : "-", r.summary.rmse_mean,
                r.summary.rmse_std, r.summary.kl_mean, r.summary.gamma_mean, r.summary.diverged,
                r.runs.size());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shrinkage ensemble transform Kalman filter experiments on Lorenz '96"};
  app.require_subcommand(1);

  Source run_src, sweep_src;
  std::string run_out, sweep_out;
  int run_jobs = 1, sweep_jobs = 1;

  auto* run = app.add_subcommand("run", "run all replicates of a single configuration");
  add_source_options(run, run_src);
  run->add_option("--out", run_out, "directory for CSV outputs");
  run->add_option("--jobs", run_jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* sw = app.add_subcommand("sweep", "run every cell of the config's sweep blocks");
  add_source_options(sw, sweep_src);
  sw->add_option("--out", sweep_out, "directory for CSV outputs");
  sw->add_option("--jobs", sweep_jobs, "worker threads")->check(CLI::PositiveNumber);

  Source clim_src;
  std::string clim_out;
  std::optional<int> clim_samples;
  auto* clim = app.add_subcommand("climatology", "generate and save a target covariance");
  clim->add_option("--config", clim_src.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  clim->add_option("--preset", clim_src.preset, "named preset");
  clim->add_option("--seed", clim_src.seed, "climatology seed");
  clim->add_option("--samples", clim_samples, "number of snapshots");
  clim->add_option("--out", clim_out, "output container")->required();

  std::string dump_name;
  auto* pre = app.add_subcommand("presets", "list presets or print one as a config document");
  pre->add_option("--dump", dump_name, "print the named preset as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ExperimentConfig cfg = resolve(run_src);
      cfg.sweep.clear();
      const std::vector<ExperimentResult> results{run_twin_experiment(cfg, run_jobs)};
      print_summary(results);
      if (!run_out.empty()) write_outputs(run_out, cfg, results);
    } else if (*sw) {
      const ExperimentConfig cfg = resolve(sweep_src);
      const std::vector<ExperimentResult> results = sweep(cfg, sweep_jobs);
      print_summary(results);
      if (!sweep_out.empty()) write_outputs(sweep_out, cfg, results);
    } else if (*clim) {
      ExperimentConfig cfg;
      if (!clim_src.config.empty()) cfg = load_config(clim_src.config);
      else if (!clim_src.preset.empty()) cfg = find_preset(clim_src.preset).config;
      cfg.climatology.path.reset();
      if (clim_src.seed) cfg.climatology.seed = *clim_src.seed;
      if (clim_samples) cfg.climatology.samples = *clim_samples;
      const TargetCovariance p = obtain_climatology(cfg);
      p.save(clim_out);
      std::printf("wrote %s: n=%ld rank=%ld top eigenvalue %.6g\n", clim_out.c_str(),
                  static_cast<long>(p.dim()), static_cast<long>(p.rank()), p.spectrum()(0));
    } else if (*pre) {
      if (!dump_name.empty()) {
        std::cout << dump_config(find_preset(dump_name).config) << "\n";
      } else {
        for (const Preset& p : presets()) {
          std::printf("%-12s %s\n", p.name.c_str(), p.description.c_str());
        }
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
