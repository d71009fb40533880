#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

#include "enshrink/errors.hpp"
#include "enshrink/experiment.hpp"

namespace enshrink {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw Error(ErrorKind::Config, where + " must be an object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || item.key() == k;
    if (!ok) throw Error(ErrorKind::Config, "unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("bad value for '") + key + "': " + e.what());
  }
}

double read_radius(const json& v) {
  if (v.is_string() && v.get<std::string>() == "inf") {
    return std::numeric_limits<double>::infinity();
  }
  if (!v.is_number()) throw Error(ErrorKind::Config, "radius must be a number or \"inf\"");
  return v.get<double>();
}

json radius_json(double r) { return std::isinf(r) ? json("inf") : json(r); }

GammaPolicy read_gamma(const json& v) {
  if (v.is_number()) {
    std::ostringstream s;
    s.precision(17);
    s << v.get<double>();
    return GammaPolicy::parse(s.str());
  }
  if (v.is_string()) return GammaPolicy::parse(v.get<std::string>());
  throw Error(ErrorKind::Config, "gamma must be \"rblw\", \"closed_form\" or a number");
}

json gamma_json(const GammaPolicy& g) {
  switch (g.kind) {
    case GammaPolicy::Kind::RBLW: return "rblw";
    case GammaPolicy::Kind::ClosedForm: return "closed_form";
    case GammaPolicy::Kind::Static: return g.value;
  }
  return nullptr;
}

ObservationKind parse_observation(const std::string& s) {
  if (s == "identity") return ObservationKind::Identity;
  if (s == "square") return ObservationKind::Square;
  throw Error(ErrorKind::Config, "unknown observation operator '" + s + "'");
}

template <typename T, typename F>
std::vector<T> read_axis(const json& obj, const char* key, const T& fallback, F convert) {
  if (!obj.contains(key)) return {fallback};
  const json& arr = obj.at(key);
  if (!arr.is_array()) throw Error(ErrorKind::Config, std::string("sweep axis '") + key + "' must be a list");
  if (arr.empty()) throw Error(ErrorKind::Config, std::string("sweep axis '") + key + "' is empty");
  std::vector<T> out;
  for (const json& v : arr) out.push_back(convert(v));
  return out;
}

SweepAxes read_sweep_block(const json& obj, const ExperimentConfig& base) {
  check_keys(obj, "sweep", {"variant", "ensemble_size", "synthetic_size", "inflation", "gamma"});
  SweepAxes axes;
  axes.variant = read_axis(obj, "variant", base.filter.variant,
                           [](const json& v) { return parse_variant(v.get<std::string>()); });
  axes.ensemble_size =
      read_axis(obj, "ensemble_size", base.ensemble_size, [](const json& v) { return v.get<int>(); });
  axes.synthetic_size = read_axis(obj, "synthetic_size", base.filter.synthetic.size,
                                  [](const json& v) { return v.get<int>(); });
  axes.inflation = read_axis(obj, "inflation", base.filter.inflation,
                             [](const json& v) { return v.get<double>(); });
  axes.gamma = read_axis(obj, "gamma", base.filter.gamma, read_gamma);
  return axes;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, std::string("invalid JSON: ") + e.what());
  }
  check_keys(doc, "config",
             {"schema_version", "id", "model", "assimilation_steps", "spinup_steps", "cycle",
              "truth_spinup_time", "initial_spread", "observation", "model_error_variance",
              "ensemble_size", "filter", "replicates", "base_seed", "rank_variable",
              "climatology", "sweep"});
  int version = 0;
  read(doc, "schema_version", version);
  if (version != kSchemaVersion) {
    throw Error(ErrorKind::Config, "unsupported schema_version " + std::to_string(version));
  }

  ExperimentConfig cfg;
  read(doc, "id", cfg.id);
  if (doc.contains("model")) {
    const json& m = doc.at("model");
    check_keys(m, "model", {"n", "forcing", "step"});
    read(m, "n", cfg.model.n);
    read(m, "forcing", cfg.model.forcing);
    read(m, "step", cfg.model.step);
  }
  read(doc, "assimilation_steps", cfg.assimilation_steps);
  read(doc, "spinup_steps", cfg.spinup_steps);
  read(doc, "cycle", cfg.cycle);
  read(doc, "truth_spinup_time", cfg.truth_spinup_time);
  read(doc, "initial_spread", cfg.initial_spread);
  read(doc, "model_error_variance", cfg.model_error_variance);
  read(doc, "ensemble_size", cfg.ensemble_size);
  read(doc, "replicates", cfg.replicates);
  read(doc, "base_seed", cfg.base_seed);
  read(doc, "rank_variable", cfg.rank_variable);

  if (doc.contains("observation")) {
    const json& o = doc.at("observation");
    check_keys(o, "observation", {"operator", "error_variance"});
    if (o.contains("operator")) cfg.observation = parse_observation(o.at("operator").get<std::string>());
    if (o.contains("error_variance")) {
      const json& ev = o.at("error_variance");
      cfg.error_variance = ev.is_array() ? ev.get<std::vector<double>>()
                                         : std::vector<double>{ev.get<double>()};
    }
  }

  if (doc.contains("filter")) {
    const json& f = doc.at("filter");
    check_keys(f, "filter",
               {"variant", "inflation", "gamma", "synthetic_size", "distribution", "taper",
                "radius", "recenter", "localize_shrinkage"});
    if (f.contains("variant")) cfg.filter.variant = parse_variant(f.at("variant").get<std::string>());
    read(f, "inflation", cfg.filter.inflation);
    if (f.contains("gamma")) cfg.filter.gamma = read_gamma(f.at("gamma"));
    read(f, "synthetic_size", cfg.filter.synthetic.size);
    if (f.contains("distribution")) {
      cfg.filter.synthetic.distribution = parse_distribution(f.at("distribution").get<std::string>());
    }
    if (f.contains("taper")) cfg.filter.taper = parse_taper_kind(f.at("taper").get<std::string>());
    if (f.contains("radius")) cfg.filter.radius = read_radius(f.at("radius"));
    read(f, "recenter", cfg.filter.recenter_analysis_anomalies);
    read(f, "localize_shrinkage", cfg.filter.localize_shrinkage);
  }

  if (doc.contains("climatology")) {
    const json& c = doc.at("climatology");
    check_keys(c, "climatology",
               {"path", "samples", "spinup_time", "interval_steps", "seed", "mode", "members",
                "taper_radius"});
    if (c.contains("path") && !c.at("path").is_null()) {
      cfg.climatology.path = c.at("path").get<std::string>();
    }
    read(c, "samples", cfg.climatology.samples);
    read(c, "spinup_time", cfg.climatology.spinup_time);
    read(c, "interval_steps", cfg.climatology.interval_steps);
    read(c, "seed", cfg.climatology.seed);
    read(c, "members", cfg.climatology.members);
    if (c.contains("mode")) {
      const std::string mode = c.at("mode").get<std::string>();
      if (mode == "trajectory") cfg.climatology.mode = ClimatologyMode::Trajectory;
      else if (mode == "ensemble") cfg.climatology.mode = ClimatologyMode::Ensemble;
      else throw Error(ErrorKind::Config, "unknown climatology mode '" + mode + "'");
    }
    if (c.contains("taper_radius") && !c.at("taper_radius").is_null()) {
      cfg.climatology.taper_radius = c.at("taper_radius").get<double>();
    }
  }

  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    if (s.is_array()) {
      if (s.empty()) throw Error(ErrorKind::Config, "sweep must contain at least one block");
      for (const json& block : s) cfg.sweep.push_back(read_sweep_block(block, cfg));
    } else {
      cfg.sweep.push_back(read_sweep_block(s, cfg));
    }
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string dump_config(const ExperimentConfig& cfg) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["id"] = cfg.id;
  doc["model"] = {{"n", cfg.model.n}, {"forcing", cfg.model.forcing}, {"step", cfg.model.step}};
  doc["assimilation_steps"] = cfg.assimilation_steps;
  doc["spinup_steps"] = cfg.spinup_steps;
  doc["cycle"] = cfg.cycle;
  doc["truth_spinup_time"] = cfg.truth_spinup_time;
  doc["initial_spread"] = cfg.initial_spread;
  doc["observation"] = {
      {"operator", cfg.observation == ObservationKind::Identity ? "identity" : "square"},
      {"error_variance", cfg.error_variance.size() == 1 ? json(cfg.error_variance.front())
                                                        : json(cfg.error_variance)}};
  doc["model_error_variance"] = cfg.model_error_variance;
  doc["ensemble_size"] = cfg.ensemble_size;
  const FilterConfig& f = cfg.filter;
  doc["filter"] = {{"variant", std::string(to_string(f.variant))},
                   {"inflation", f.inflation},
                   {"gamma", gamma_json(f.gamma)},
                   {"synthetic_size", f.synthetic.size},
                   {"distribution", std::string(to_string(f.synthetic.distribution))},
                   {"taper", std::string(to_string(f.taper))},
                   {"radius", radius_json(f.radius)},
                   {"recenter", f.recenter_analysis_anomalies},
                   {"localize_shrinkage", f.localize_shrinkage}};
  doc["replicates"] = cfg.replicates;
  doc["base_seed"] = cfg.base_seed;
  doc["rank_variable"] = cfg.rank_variable;
  const ClimatologySource& c = cfg.climatology;
  doc["climatology"] = {
      {"path", c.path ? json(c.path->string()) : json(nullptr)},
      {"samples", c.samples},
      {"spinup_time", c.spinup_time},
      {"interval_steps", c.interval_steps},
      {"seed", c.seed},
      {"mode", c.mode == ClimatologyMode::Trajectory ? "trajectory" : "ensemble"},
      {"members", c.members},
      {"taper_radius", c.taper_radius ? json(*c.taper_radius) : json(nullptr)}};
  if (!cfg.sweep.empty()) {
    json blocks = json::array();
    for (const SweepAxes& a : cfg.sweep) {
      json b;
      json variants = json::array();
      for (FilterVariant v : a.variant) variants.push_back(std::string(to_string(v)));
      json gammas = json::array();
      for (const GammaPolicy& g : a.gamma) gammas.push_back(gamma_json(g));
      b["variant"] = variants;
      b["ensemble_size"] = a.ensemble_size;
      b["synthetic_size"] = a.synthetic_size;
      b["inflation"] = a.inflation;
      b["gamma"] = gammas;
      blocks.push_back(b);
    }
    doc["sweep"] = blocks;
  }
  return doc.dump(2);
}

namespace {

ExperimentConfig l96_base() {
  ExperimentConfig cfg;
  cfg.model = ModelConfig{40, 8.0, 0.05};
  cfg.cycle = 0.05;
  cfg.assimilation_steps = 2200;
  cfg.spinup_steps = 200;
  cfg.error_variance = {1.0};
  cfg.filter.inflation = 1.1;
  cfg.filter.synthetic.size = 100;
  return cfg;
}

SweepAxes axes(std::vector<FilterVariant> v, std::vector<int> n, std::vector<int> m,
               std::vector<GammaPolicy> g) {
  return SweepAxes{std::move(v), std::move(n), std::move(m), {1.1}, std::move(g)};
}

std::vector<Preset> build_presets() {
  std::vector<Preset> out;
  {
    ExperimentConfig cfg = l96_base();
    cfg.id = "l96-fig1";
    cfg.replicates = 20;
    cfg.filter.variant = FilterVariant::ShrinkSymmetric;
    cfg.sweep = {
        axes({FilterVariant::ShrinkSymmetric}, {5}, {25, 50, 100},
             {GammaPolicy::rblw(), GammaPolicy::fixed(0.85)}),
        axes({FilterVariant::ShrinkSymmetric}, {14}, {25, 50, 100},
             {GammaPolicy::rblw(), GammaPolicy::fixed(0.1)}),
        axes({FilterVariant::ETKF, FilterVariant::LETKF}, {5, 14}, {100}, {GammaPolicy::rblw()}),
    };
    out.push_back({"l96-fig1",
                   "Lorenz '96, N in {5,14}, M in {25,50,100}, RBLW vs tuned static gamma, "
                   "ETKF/LETKF baselines, 20 replicates",
                   cfg});
  }
  {
    ExperimentConfig cfg = l96_base();
    cfg.id = "l96-fig2";
    cfg.replicates = 20;
    cfg.filter.variant = FilterVariant::ShrinkSymmetric;
    cfg.sweep = {axes({FilterVariant::ShrinkSymmetric}, {5, 8, 11, 14}, {25, 50, 100},
                      {GammaPolicy::rblw()})};
    out.push_back({"l96-fig2",
                   "Lorenz '96, RBLW shrinkage over dynamic size N and synthetic size M, "
                   "20 replicates",
                   cfg});
  }
  {
    ExperimentConfig cfg = l96_base();
    cfg.id = "l96-desk";
    cfg.replicates = 5;
    cfg.filter.variant = FilterVariant::ShrinkSymmetric;
    cfg.sweep = {axes({FilterVariant::ETKF}, {5, 14}, {100}, {GammaPolicy::rblw()}),
                 axes({FilterVariant::ShrinkSymmetric}, {5}, {25, 100},
                      {GammaPolicy::rblw(), GammaPolicy::fixed(0.85)}),
                 axes({FilterVariant::ShrinkSymmetric}, {14}, {100}, {GammaPolicy::rblw()})};
    out.push_back({"l96-desk", "Reduced study: 5 replicates of the main comparisons", cfg});
  }
  {
    ExperimentConfig cfg = l96_base();
    cfg.id = "l96-smoke";
    cfg.replicates = 1;
    cfg.assimilation_steps = 300;
    cfg.spinup_steps = 50;
    cfg.filter.variant = FilterVariant::ShrinkSymmetric;
    cfg.filter.gamma = GammaPolicy::fixed(0.85);
    cfg.climatology.samples = 500;
    out.push_back({"l96-smoke", "Single short shrinkage run for a quick check", cfg});
  }
  return out;
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = build_presets();
  return all;
}

const Preset& find_preset(std::string_view name) {
  for (const Preset& p : presets()) {
    if (p.name == name) return p;
  }
  throw Error(ErrorKind::Config, "unknown preset '" + std::string(name) + "'");
}

}  // namespace enshrink
