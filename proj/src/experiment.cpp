#include "enshrink/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "enshrink/errors.hpp"

namespace enshrink {

int ExperimentConfig::steps_per_cycle() const {
  const double ratio = cycle / model.step;
  const long steps = std::lround(ratio);
  if (steps < 1 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * ratio) {
    throw Error(ErrorKind::Config, "cycle length must be a positive multiple of the model step");
  }
  return static_cast<int>(steps);
}

void ExperimentConfig::validate() const {
  model.validate();
  filter.validate();
  steps_per_cycle();
  if (assimilation_steps < 1) throw Error(ErrorKind::Config, "assimilation_steps must be >= 1");
  if (spinup_steps < 0 || spinup_steps >= assimilation_steps) {
    throw Error(ErrorKind::Config, "spinup_steps must be in [0, assimilation_steps)");
  }
  if (replicates < 1) throw Error(ErrorKind::Config, "replicates must be >= 1");
  if (ensemble_size < 2) throw Error(ErrorKind::Config, "ensemble_size must be >= 2");
  if (rank_variable < 0 || rank_variable >= model.n) {
    throw Error(ErrorKind::Config, "rank_variable out of range");
  }
  if (truth_spinup_time < 0.0) throw Error(ErrorKind::Config, "truth_spinup_time must be >= 0");
  if (!(initial_spread > 0.0)) throw Error(ErrorKind::Config, "initial_spread must be positive");
  if (model_error_variance < 0.0) {
    throw Error(ErrorKind::Config, "model_error_variance must be >= 0");
  }
  if (error_variance.size() != 1 && error_variance.size() != static_cast<std::size_t>(model.n)) {
    throw Error(ErrorKind::Config, "error_variance must be a scalar or have n entries");
  }
  for (double v : error_variance) {
    if (!(v > 0.0)) throw Error(ErrorKind::Config, "error variances must be positive");
  }
  if (climatology.samples < 2) throw Error(ErrorKind::Config, "climatology samples must be >= 2");
  if (climatology.interval_steps < 1) {
    throw Error(ErrorKind::Config, "climatology interval_steps must be >= 1");
  }
  for (const SweepAxes& axes : sweep) {
    if (axes.variant.empty() || axes.ensemble_size.empty() || axes.synthetic_size.empty() ||
        axes.inflation.empty() || axes.gamma.empty()) {
      throw Error(ErrorKind::Config, "sweep axes must be non-empty");
    }
  }
}

Rng make_stream(std::uint64_t base_seed, int replicate, StreamRole role) {
  const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(replicate);
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(role)};
  return Rng(seq);
}

ObservationOperator make_observation_operator(const ExperimentConfig& cfg) {
  switch (cfg.observation) {
    case ObservationKind::Identity: return ObservationOperator::identity(cfg.model.n);
    case ObservationKind::Square: return ObservationOperator::elementwise_square(cfg.model.n);
  }
  throw Error(ErrorKind::Config, "unknown observation operator");
}

Matrix make_observation_error(const ExperimentConfig& cfg) {
  const Eigen::Index m = cfg.model.n;
  if (cfg.error_variance.size() == 1) {
    return cfg.error_variance.front() * Matrix::Identity(m, m);
  }
  Vector diag(m);
  for (Eigen::Index i = 0; i < m; ++i) diag(i) = cfg.error_variance[static_cast<std::size_t>(i)];
  return diag.asDiagonal();
}

DistanceFn make_distance(const ExperimentConfig& cfg, const ObservationOperator& h) {
  const auto period = static_cast<double>(cfg.model.n);
  std::vector<double> loc = h.locations();
  return [period, loc](Eigen::Index j, Eigen::Index k) {
    return periodic_distance(static_cast<double>(j), loc.at(static_cast<std::size_t>(k)),
                             period);
  };
}

TargetCovariance obtain_climatology(const ExperimentConfig& cfg) {
  const ClimatologySource& src = cfg.climatology;
  if (src.path) return TargetCovariance::load(*src.path);
  Rng rng(src.seed);
  ClimatologyOptions opts;
  opts.mode = src.mode;
  opts.members = src.members;
  opts.taper_radius = src.taper_radius;
  const int spinup = static_cast<int>(std::lround(src.spinup_time / cfg.model.step));
  return generate_climatology(cfg.model, src.samples, spinup, src.interval_steps, rng, opts);
}

RunMetrics run_replicate(const ExperimentConfig& cfg, const TargetCovariance* climatology,
                         int replicate) {
  const Eigen::Index n = cfg.model.n;
  const int cycle_steps = cfg.steps_per_cycle();
  const double h = cfg.model.step;
  const Tendency f = lorenz96(cfg.model.forcing);
  const ObservationOperator op = make_observation_operator(cfg);
  const Matrix r = make_observation_error(cfg);
  const Vector obs_sd = r.diagonal().cwiseSqrt();
  const DistanceFn distance = make_distance(cfg, op);
  const ModelErrorSpec q = ModelErrorSpec::isotropic(cfg.model.n, cfg.model_error_variance);

  Rng truth_rng = make_stream(cfg.base_seed, replicate, StreamRole::TruthAndObservations);
  Rng init_rng = make_stream(cfg.base_seed, replicate, StreamRole::EnsembleInit);
  Rng synthetic_rng = make_stream(cfg.base_seed, replicate, StreamRole::Synthetic);
  Rng tie_rng = make_stream(cfg.base_seed, replicate, StreamRole::TieBreak);
  Rng model_rng = make_stream(cfg.base_seed, replicate, StreamRole::ModelError);

  ModelState truth{Vector::Constant(n, cfg.model.forcing) + standard_normal(n, truth_rng), 0.0};
  truth = integrate(f, truth, static_cast<int>(std::lround(cfg.truth_spinup_time / h)), h);
  truth.time = 0.0;

  Ensemble ens{Matrix(n, cfg.ensemble_size), 0.0};
  for (int k = 0; k < cfg.ensemble_size; ++k) {
    ens.members.col(k) = truth.values + cfg.initial_spread * standard_normal(n, init_rng);
  }

  RunMetrics run;
  run.replicate = replicate;
  run.histogram = RankHistogram(cfg.ensemble_size);
  std::vector<Vector> means, truths;
  const auto scored = static_cast<std::size_t>(cfg.assimilation_steps - cfg.spinup_steps);
  means.reserve(scored);
  truths.reserve(scored);
  run.gamma_trace.reserve(scored);
  DivergenceMonitor monitor;

  try {
    for (int step = 1; step <= cfg.assimilation_steps; ++step) {
      truth = integrate(f, truth, cycle_steps, h);
      ObservationRecord obs{op.apply(truth.values) +
                                obs_sd.cwiseProduct(standard_normal(op.output_dim(), truth_rng)),
                            r, truth.time};

      for (int k = 0; k < cfg.ensemble_size; ++k) {
        const ModelState member =
            forecast_member(f, {ens.members.col(k), ens.time}, cycle_steps, h, q, model_rng);
        ens.members.col(k) = member.values;
      }
      ens.time = truth.time;

      TransformResult res = analyze(ens, obs, op, climatology, cfg.filter, synthetic_rng, distance);
      ens = std::move(res.analysis);
      ens.time = truth.time;

      if (monitor.record(res.mean, truth.values) || !ens.members.allFinite()) {
        run.diverged = true;
        run.diverged_at_step = step;
        break;
      }
      if (step > cfg.spinup_steps) {
        means.push_back(res.mean);
        truths.push_back(truth.values);
        run.gamma_trace.push_back(res.gamma);
        run.histogram.add(truth_rank(ens.members.row(cfg.rank_variable).transpose(),
                                     truth.values(cfg.rank_variable), tie_rng));
      }
    }
  } catch (const Error& e) {
    // Blowups and numerically singular analyses end the replicate as diverged;
    // configuration problems are not divergence.
    if (e.kind() == ErrorKind::Config || e.kind() == ErrorKind::ShapeMismatch) throw;
    run.diverged = true;
    if (run.diverged_at_step < 0) {
      run.diverged_at_step = static_cast<int>(means.size()) + cfg.spinup_steps + 1;
    }
  }

  const double inf = std::numeric_limits<double>::infinity();
  if (run.diverged) {
    run.rmse = inf;
    run.kl = inf;
    run.error_norm = inf;
  } else {
    run.rmse = spatiotemporal_rmse(means, truths);
    run.error_norm = unnormalized_error_norm(means, truths);
    run.kl = kl_from_uniform(run.histogram);
  }
  double gsum = 0.0;
  for (double g : run.gamma_trace) gsum += g;
  run.mean_gamma = run.gamma_trace.empty() ? std::numeric_limits<double>::quiet_NaN()
                                           : gsum / static_cast<double>(run.gamma_trace.size());
  return run;
}

namespace {

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  const double inf = std::numeric_limits<double>::infinity();
  if (xs.empty()) {
    mean = sd = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  for (double x : xs) {
    if (std::isinf(x)) {
      mean = sd = inf;
      return;
    }
  }
  double s = 0.0;
  for (double x : xs) s += x;
  mean = s / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
}

}  // namespace

Summary summarize(const std::vector<RunMetrics>& runs) {
  Summary s;
  std::vector<double> rmse, kl, gamma;
  RankHistogram pooled;
  for (const RunMetrics& r : runs) {
    rmse.push_back(r.rmse);
    kl.push_back(r.kl);
    if (!std::isnan(r.mean_gamma)) gamma.push_back(r.mean_gamma);
    if (r.diverged) ++s.diverged;
    else pooled.merge(r.histogram);
  }
  mean_std(rmse, s.rmse_mean, s.rmse_std);
  mean_std(kl, s.kl_mean, s.kl_std);
  mean_std(gamma, s.gamma_mean, s.gamma_std);
  s.pooled_kl = pooled.total > 0 ? kl_from_uniform(pooled)
                                 : std::numeric_limits<double>::infinity();
  return s;
}

namespace {

std::vector<double> mean_gamma_trace(const std::vector<RunMetrics>& runs) {
  std::size_t len = 0;
  for (const auto& r : runs) len = std::max(len, r.gamma_trace.size());
  std::vector<double> trace(len, 0.0);
  std::vector<int> count(len, 0);
  for (const auto& r : runs) {
    for (std::size_t i = 0; i < r.gamma_trace.size(); ++i) {
      trace[i] += r.gamma_trace[i];
      ++count[i];
    }
  }
  for (std::size_t i = 0; i < len; ++i) trace[i] /= count[i];
  return trace;
}

// Runs task(i) for i in [0, count) on `jobs` threads; results are written by
// index, so the outcome does not depend on scheduling.
template <typename Task>
void parallel_for(std::size_t count, int jobs, Task task) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

bool needs_climatology(const ExperimentConfig& cfg) {
  if (uses_shrinkage(cfg.filter.variant)) return true;
  for (const auto& axes : cfg.sweep) {
    for (FilterVariant v : axes.variant) {
      if (uses_shrinkage(v)) return true;
    }
  }
  return false;
}

std::vector<ExperimentResult> run_cells(const std::vector<ExperimentConfig>& cells, int jobs,
                                        const TargetCovariance* climatology) {
  std::vector<ExperimentResult> results(cells.size());
  std::vector<std::pair<std::size_t, int>> tasks;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    results[c].config = cells[c];
    results[c].runs.resize(static_cast<std::size_t>(cells[c].replicates));
    for (int r = 0; r < cells[c].replicates; ++r) tasks.emplace_back(c, r);
  }
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    const auto [c, r] = tasks[i];
    results[c].runs[static_cast<std::size_t>(r)] = run_replicate(cells[c], climatology, r);
  });
  for (auto& res : results) {
    res.summary = summarize(res.runs);
    res.gamma_trace = mean_gamma_trace(res.runs);
  }
  return results;
}

}  // namespace

ExperimentResult run_twin_experiment(const ExperimentConfig& cfg, int jobs,
                                     const TargetCovariance* climatology) {
  cfg.validate();
  std::optional<TargetCovariance> owned;
  if (!climatology && uses_shrinkage(cfg.filter.variant)) {
    owned.emplace(obtain_climatology(cfg));
    climatology = &*owned;
  }
  return std::move(run_cells({cfg}, jobs, climatology).front());
}

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.sweep.empty()) {
    ExperimentConfig single = cfg;
    return {single};
  }
  std::vector<ExperimentConfig> cells;
  for (const SweepAxes& axes : cfg.sweep) {
    for (FilterVariant v : axes.variant)
      for (int n : axes.ensemble_size)
        for (int m : axes.synthetic_size)
          for (double a : axes.inflation)
            for (const GammaPolicy& g : axes.gamma) {
              ExperimentConfig cell = cfg;
              cell.sweep.clear();
              cell.filter.variant = v;
              cell.ensemble_size = n;
              cell.filter.synthetic.size = m;
              cell.filter.inflation = a;
              cell.filter.gamma = g;
              cell.validate();
              cells.push_back(std::move(cell));
            }
  }
  return cells;
}

std::vector<ExperimentResult> sweep(const ExperimentConfig& cfg, int jobs) {
  const std::vector<ExperimentConfig> cells = expand_sweep(cfg);
  std::optional<TargetCovariance> clim;
  if (needs_climatology(cfg)) clim.emplace(obtain_climatology(cfg));
  return run_cells(cells, jobs, clim ? &*clim : nullptr);
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string cell_prefix(const ExperimentConfig& c) {
  return c.id + ',' + std::string(to_string(c.filter.variant)) + ',' +
         std::to_string(c.ensemble_size) + ',' +
         (uses_shrinkage(c.filter.variant) ? std::to_string(c.filter.synthetic.size) : "0") +
         ',' + num(c.filter.inflation) + ',' +
         (uses_shrinkage(c.filter.variant) ? c.filter.gamma.label() : "none");
}

}  // namespace

void write_runs_csv(std::ostream& out, const std::vector<ExperimentResult>& results) {
  out << "experiment_id,variant,N,M,alpha,gamma_policy,replicate,rmse,kl,mean_gamma,diverged\n";
  for (const auto& res : results) {
    const std::string prefix = cell_prefix(res.config);
    for (const auto& run : res.runs) {
      out << prefix << ',' << run.replicate << ',' << num(run.rmse) << ',' << num(run.kl) << ','
          << num(run.mean_gamma) << ',' << (run.diverged ? 1 : 0) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& out, const std::vector<ExperimentResult>& results) {
  out << "experiment_id,variant,N,M,alpha,gamma_policy,replicates,rmse_mean,rmse_std,kl_mean,"
         "kl_std,gamma_mean,gamma_std,pooled_kl,diverged\n";
  for (const auto& res : results) {
    const Summary& s = res.summary;
    out << cell_prefix(res.config) << ',' << res.runs.size() << ',' << num(s.rmse_mean) << ','
        << num(s.rmse_std) << ',' << num(s.kl_mean) << ',' << num(s.kl_std) << ','
        << num(s.gamma_mean) << ',' << num(s.gamma_std) << ',' << num(s.pooled_kl) << ','
        << s.diverged << '\n';
  }
}

void write_gamma_csv(std::ostream& out, const std::vector<ExperimentResult>& results) {
  out << "experiment_id,variant,N,M,alpha,gamma_policy,step,gamma_mean\n";
  for (const auto& res : results) {
    const std::string prefix = cell_prefix(res.config);
    for (std::size_t i = 0; i < res.gamma_trace.size(); ++i) {
      out << prefix << ',' << (res.config.spinup_steps + 1 + static_cast<int>(i)) << ','
          << num(res.gamma_trace[i]) << '\n';
    }
  }
}

void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                   const std::vector<ExperimentResult>& results) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& suffix) {
    const auto path = dir / (cfg.id + suffix);
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    return out;
  };
  {
    auto out = open("_runs.csv");
    write_runs_csv(out, results);
  }
  {
    auto out = open("_summary.csv");
    write_summary_csv(out, results);
  }
  {
    auto out = open("_gamma.csv");
    write_gamma_csv(out, results);
  }
  {
    auto out = open("_config.json");
    out << dump_config(cfg) << '\n';
  }
}

}  // namespace enshrink
