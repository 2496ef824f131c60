#include "amdm/harness/config.hpp"

#include <json.hpp>

#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace amdm::harness {

namespace {

using Json = nlohmann::json;

struct KindInfo {
  ExperimentKind kind;
  std::string_view name;
  std::string_view summary;
};

constexpr std::array<KindInfo, 7> kKinds{{
    {ExperimentKind::kAmdm, "amdm", "joint domain membership of AMDM finals against model 1 alone"},
    {ExperimentKind::kAblationLinear, "ablation-linear",
     "shell deviation of linear vs spherical aggregation over a sweep of s"},
    {ExperimentKind::kAblationStage, "ablation-stage", "joint membership when the aggregation window starts later"},
    {ExperimentKind::kAblationEta, "ablation-eta", "joint membership and distance d over a sweep of eta"},
    {ExperimentKind::kTheoryChecks, "theory-checks",
     "concentration bound, membership bound and moment ODE against closed forms"},
    {ExperimentKind::kComposition2d, "composition-2d", "2-D product task: summed scores + Langevin vs AMDM"},
    {ExperimentKind::kStatsTable, "stats-table", "per-step angle and norm statistics of an N = 2 AMDM run"},
}};

// Reads one JSON object and rejects keys nobody asked for, so typos in a
// config fail loudly instead of silently falling back to defaults.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const Json& at(const char* key) {
    if (!has(key)) fail(std::string("missing key '") + key + "'");
    return j_.at(key);
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception& e) {
      fail(std::string("bad value for '") + key + "': " + e.what());
    }
  }

  std::string child(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.contains(item.key())) fail("unknown key '" + item.key() + "'");
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(path_ + ": " + msg); }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vector parse_mean(const Json& j, Eigen::Index dim, const std::string& path) {
  Vector mean;
  if (j.is_array()) {
    const auto values = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != dim)
      throw ConfigError(path + ": mean has " + std::to_string(values.size()) + " entries, model dim is " +
                        std::to_string(dim));
    mean = Eigen::Map<const Vector>(values.data(), dim);
    return mean;
  }
  ObjectReader r(j, path);
  double fill = 0.0;
  r.get("fill", fill);
  mean = Vector::Constant(dim, fill);
  std::vector<std::pair<long long, double>> sets;
  r.get("set", sets);
  for (const auto& [i, v] : sets) {
    if (i < 0 || i >= dim) r.fail("set index " + std::to_string(i) + " out of range");
    mean[static_cast<Eigen::Index>(i)] = v;
  }
  r.finish();
  return mean;
}

ModelSpec parse_model(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  std::string name;
  r.get("name", name);
  long long dim = 0;
  r.get("dim", dim);
  if (dim < 1) r.fail("dim must be >= 1");

  const Json& comps = r.at("components");
  if (!comps.is_array() || comps.empty()) r.fail("components must be a non-empty array");
  std::vector<Component> components;
  std::vector<double> weights;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const std::string cpath = r.child("components") + "[" + std::to_string(k) + "]";
    ObjectReader c(comps[k], cpath);
    Component comp;
    comp.mean = parse_mean(c.at("mean"), static_cast<Eigen::Index>(dim), c.child("mean"));
    c.get("variance", comp.variance);
    double weight = 1.0;
    c.get("weight", weight);
    c.finish();
    components.push_back(std::move(comp));
    weights.push_back(weight);
  }

  std::map<std::string, std::vector<std::size_t>> conditions;
  r.get("conditions", conditions);
  Condition condition{std::string(kUnconditional), 0.0};
  r.get("condition", condition.label);
  r.get("guidance_scale", condition.guidance_scale);
  r.finish();

  try {
    MixtureModel mixture(std::move(components), std::move(weights), std::move(conditions));
    if (!mixture.has_condition(condition.label)) r.fail("unknown condition '" + condition.label + "'");
    return ModelSpec{name, std::move(mixture), condition};
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }
}

template <typename T>
void require(bool ok, const T& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

std::string_view kind_name(ExperimentKind kind) {
  for (const auto& info : kKinds)
    if (info.kind == kind) return info.name;
  return "?";
}

std::string_view kind_summary(ExperimentKind kind) {
  for (const auto& info : kKinds)
    if (info.kind == kind) return info.summary;
  return "";
}

std::optional<ExperimentKind> parse_kind(std::string_view name) {
  for (const auto& info : kKinds)
    if (info.name == name) return info.kind;
  return std::nullopt;
}

const std::vector<ExperimentKind>& all_kinds() {
  static const std::vector<ExperimentKind> kinds = [] {
    std::vector<ExperimentKind> out;
    for (const auto& info : kKinds) out.push_back(info.kind);
    return out;
  }();
  return kinds;
}

NoiseSchedule ExperimentConfig::make_schedule() const {
  return NoiseSchedule::linear(schedule.beta_start, schedule.beta_end, schedule.steps);
}

std::vector<DiffusionModel> ExperimentConfig::make_models() const {
  const auto sched = make_schedule();
  std::vector<DiffusionModel> out;
  out.reserve(models.size());
  for (const auto& m : models) out.push_back({m.mixture, sched});
  return out;
}

std::vector<Condition> ExperimentConfig::conditions() const {
  std::vector<Condition> out;
  out.reserve(models.size());
  for (const auto& m : models) out.push_back(m.condition);
  return out;
}

ExperimentConfig parse_config(std::string_view text, const std::string& source) {
  Json root;
  try {
    root = Json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(source + ": " + e.what());
  }

  ExperimentConfig cfg;
  ObjectReader r(root, source);
  r.get("id", cfg.id);
  std::string kind;
  r.get("experiment", kind);
  const auto parsed = parse_kind(kind);
  if (!parsed) r.fail("unknown experiment kind '" + kind + "'");
  cfg.kind = *parsed;
  r.get("trials", cfg.trials);
  r.get("base_seed", cfg.base_seed);
  std::string out_dir = cfg.output_dir.string();
  r.get("output_dir", out_dir);
  cfg.output_dir = out_dir;
  r.get("svg", cfg.write_svg);

  if (r.has("schedule")) {
    ObjectReader s(root.at("schedule"), r.child("schedule"));
    s.get("beta_start", cfg.schedule.beta_start);
    s.get("beta_end", cfg.schedule.beta_end);
    s.get("steps", cfg.schedule.steps);
    s.finish();
  }

  if (r.has("sampler")) {
    ObjectReader s(root.at("sampler"), r.child("sampler"));
    s.get("substeps", cfg.sampler.substeps);
    s.get("eta", cfg.sampler.eta);
    s.finish();
  }

  if (r.has("models")) {
    const Json& models = root.at("models");
    if (!models.is_array()) r.fail("models must be an array");
    for (std::size_t i = 0; i < models.size(); ++i)
      cfg.models.push_back(parse_model(models[i], r.child("models") + "[" + std::to_string(i) + "]"));
  }

  // Per-model defaults follow the model count.
  const std::size_t n_models = cfg.models.size();
  cfg.aggregation.weights.assign(n_models > 0 ? n_models - 1 : 0, 0.5);
  cfg.aggregation.etas.assign(n_models, 0.3);
  if (r.has("aggregation")) {
    ObjectReader a(root.at("aggregation"), r.child("aggregation"));
    a.get("steps", cfg.aggregation.steps);
    a.get("weights", cfg.aggregation.weights);
    a.get("etas", cfg.aggregation.etas);
    a.get("stage_offset", cfg.aggregation.stage_offset);
    std::string kind_str = "spherical";
    a.get("kind", kind_str);
    if (kind_str == "spherical")
      cfg.aggregation.kind = AggregationKind::kSpherical;
    else if (kind_str == "linear")
      cfg.aggregation.kind = AggregationKind::kLinear;
    else
      a.fail("kind must be 'spherical' or 'linear'");
    std::string overshoot = "error";
    a.get("overshoot", overshoot);
    if (overshoot == "error")
      cfg.aggregation.overshoot = OvershootPolicy::kError;
    else if (overshoot == "skip")
      cfg.aggregation.overshoot = OvershootPolicy::kSkip;
    else
      a.fail("overshoot must be 'error' or 'skip'");
    a.finish();
  }

  if (r.has("membership")) {
    ObjectReader m(root.at("membership"), r.child("membership"));
    m.get("quantile", cfg.membership.quantile);
    m.get("calibration_draws", cfg.membership.calibration_draws);
    m.get("min_gain", cfg.membership.min_gain);
    m.finish();
  }
  if (r.has("linear_ablation")) {
    ObjectReader m(root.at("linear_ablation"), r.child("linear_ablation"));
    m.get("steps", cfg.linear.steps);
    m.get("min_ratio", cfg.linear.min_ratio);
    m.finish();
  }
  if (r.has("stage_ablation")) {
    ObjectReader m(root.at("stage_ablation"), r.child("stage_ablation"));
    m.get("offsets", cfg.stage.offsets);
    m.finish();
  }
  if (r.has("eta_ablation")) {
    ObjectReader m(root.at("eta_ablation"), r.child("eta_ablation"));
    m.get("etas", cfg.eta.etas);
    m.finish();
  }
  if (r.has("theory")) {
    ObjectReader m(root.at("theory"), r.child("theory"));
    auto& t = cfg.theory;
    m.get("dims", t.dims);
    m.get("epsilons", t.epsilons);
    m.get("draws", t.draws);
    m.get("sigma", t.sigma);
    m.get("bound_dim", t.bound_dim);
    m.get("eps_domain", t.eps_domain);
    m.get("sigma_t", t.sigma_t);
    m.get("distances", t.distances);
    m.get("m0", t.m0);
    m.get("p0", t.p0);
    m.get("ode_step", t.ode_step);
    m.get("ode_tolerance", t.ode_tolerance);
    m.get("converge_after", t.converge_after);
    m.get("converge_tolerance", t.converge_tolerance);
    m.get("moment_grid", t.moment_grid);
    m.finish();
  }
  if (r.has("stats_table")) {
    ObjectReader m(root.at("stats_table"), r.child("stats_table"));
    m.get("phi_start_tolerance", cfg.stats.phi_start_tolerance);
    m.get("phi_max", cfg.stats.phi_max);
    m.get("norm_gap_max", cfg.stats.norm_gap_max);
    m.finish();
  }
  if (r.has("composition")) {
    ObjectReader m(root.at("composition"), r.child("composition"));
    auto& c = cfg.composition;
    m.get("samples", c.samples);
    m.get("reference_samples", c.reference_samples);
    m.get("mmd_floor", c.mmd_floor);
    m.get("confidence", c.confidence);
    if (m.has("langevin")) {
      ObjectReader l(root.at("composition").at("langevin"), m.child("langevin"));
      l.get("enabled", c.langevin.enabled);
      l.get("step_scale", c.langevin.step_scale);
      l.get("steps_per_level", c.langevin.steps_per_level);
      l.get("sampler_eta", c.langevin.sampler_eta);
      l.finish();
    }
    m.finish();
  }
  r.finish();

  if (cfg.id.empty()) cfg.id = std::string(kind_name(cfg.kind));
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

void validate(const ExperimentConfig& cfg) {
  const auto& s = cfg.schedule;
  require(cfg.trials >= 1, "trials must be >= 1");
  require(s.steps >= 1, "schedule.steps must be >= 1");
  require(s.beta_start > 0.0 && s.beta_start <= s.beta_end && s.beta_end < 1.0,
          "schedule betas must satisfy 0 < beta_start <= beta_end < 1");

  if (cfg.kind == ExperimentKind::kTheoryChecks) {
    const auto& t = cfg.theory;
    require(!t.dims.empty() && !t.epsilons.empty(), "theory.dims and theory.epsilons must be non-empty");
    for (int n : t.dims) require(n >= 1, "theory.dims entries must be >= 1");
    for (double e : t.epsilons) require(e > 0.0, "theory.epsilons entries must be > 0");
    require(t.draws >= 1, "theory.draws must be >= 1");
    require(t.sigma > 0.0 && t.sigma_t > 0.0, "theory.sigma and theory.sigma_t must be > 0");
    require(t.bound_dim >= 1, "theory.bound_dim must be >= 1");
    require(!t.distances.empty(), "theory.distances must be non-empty");
    for (double d : t.distances) require(d >= 0.0, "theory.distances entries must be >= 0");
    require(t.ode_step > 0.0 && t.ode_step <= 1.0, "theory.ode_step must lie in (0, 1]");
    require(t.p0 >= 0.0, "theory.p0 must be >= 0");
    require(t.converge_after >= 0.0 && t.converge_after < 1.0, "theory.converge_after must lie in [0, 1)");
    require(t.moment_grid >= 2, "theory.moment_grid must be >= 2");
    return;
  }

  const std::size_t n = cfg.models.size();
  require(n >= 2, "experiment '" + std::string(kind_name(cfg.kind)) + "' needs at least two models");
  for (const auto& m : cfg.models)
    require(m.mixture.dim() == cfg.models.front().mixture.dim(), "all models must share the latent dimension");

  require(cfg.sampler.substeps >= 1 && cfg.sampler.substeps <= s.steps, "sampler.substeps must lie in [1, T]");
  require(cfg.sampler.eta >= 0.0 && cfg.sampler.eta <= 1.0, "sampler.eta must lie in [0, 1]");

  const auto& a = cfg.aggregation;
  require(a.weights.size() + 1 == n, "aggregation.weights needs N - 1 entries");
  for (double w : a.weights) require(w >= 0.0 && w <= 1.0, "aggregation.weights must lie in [0, 1]");
  require(a.etas.size() == n, "aggregation.etas needs N entries");
  for (double e : a.etas) require(e >= 0.0, "aggregation.etas must be >= 0");
  require(a.steps >= 0, "aggregation.steps must be >= 0");
  require(a.stage_offset >= 0 && a.stage_offset + a.steps <= cfg.sampler.substeps,
          "aggregation window exceeds sampler.substeps");

  const auto& m = cfg.membership;
  require(m.quantile > 0.0 && m.quantile < 1.0, "membership.quantile must lie in (0, 1)");
  require(m.calibration_draws >= 1, "membership.calibration_draws must be >= 1");

  switch (cfg.kind) {
    case ExperimentKind::kAblationLinear:
      require(!cfg.linear.steps.empty(), "linear_ablation.steps must be non-empty");
      for (int st : cfg.linear.steps)
        require(st >= 1 && a.stage_offset + st <= cfg.sampler.substeps,
                "linear_ablation.steps entries must lie in [1, substeps - stage_offset]");
      break;
    case ExperimentKind::kAblationStage:
      require(cfg.stage.offsets.size() >= 2, "stage_ablation.offsets needs at least two entries");
      for (int off : cfg.stage.offsets)
        require(off >= 0 && off + a.steps <= cfg.sampler.substeps,
                "stage_ablation.offsets must keep the window inside the ladder");
      break;
    case ExperimentKind::kAblationEta:
      require(!cfg.eta.etas.empty(), "eta_ablation.etas must be non-empty");
      for (double e : cfg.eta.etas) require(e >= 0.0, "eta_ablation.etas must be >= 0");
      break;
    case ExperimentKind::kComposition2d: {
      const auto& c = cfg.composition;
      require(cfg.trials >= 2, "composition-2d needs at least two seeds for confidence intervals");
      require(c.samples >= 2 && c.reference_samples >= 2, "composition sample counts must be >= 2");
      require(c.mmd_floor > 0.0, "composition.mmd_floor must be > 0");
      require(c.confidence > 0.0 && c.confidence < 1.0, "composition.confidence must lie in (0, 1)");
      require(c.langevin.step_scale > 0.0 && c.langevin.steps_per_level >= 0,
              "composition.langevin needs step_scale > 0 and steps_per_level >= 0");
      require(c.langevin.sampler_eta >= 0.0 && c.langevin.sampler_eta <= 1.0,
              "composition.langevin.sampler_eta must lie in [0, 1]");
      break;
    }
    case ExperimentKind::kStatsTable:
      require(a.steps >= 1, "stats-table needs at least one aggregated step");
      break;
    default:
      break;
  }
}

}  // namespace amdm::harness
