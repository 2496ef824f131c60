#include "amdm/aggregate.hpp"

#include "amdm/metrics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace amdm {

namespace {

constexpr double kParallelAngle = 1e-6;

void require_same_dim(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

void require_fold_shape(std::span<const Vector> vectors, std::span<const double> weights) {
  if (vectors.size() < 2) throw std::invalid_argument("aggregation needs at least two vectors");
  if (weights.size() + 1 != vectors.size()) throw std::invalid_argument("aggregation needs N - 1 weights");
}

void validate_models(std::span<const DiffusionModel> models, std::span<const Condition> conditions,
                     const NoiseSchedule& schedule, std::span<const int> substeps, const AggregationConfig& agg) {
  const std::size_t n_models = models.size();
  if (n_models < 2) throw std::invalid_argument("aggregation needs at least two models");
  if (conditions.size() != n_models) throw std::invalid_argument("one condition per model required");
  for (std::size_t i = 0; i < n_models; ++i) {
    if (!(models[i].schedule == schedule))
      throw std::invalid_argument("model " + std::to_string(i + 1) +
                                  " uses a different noise schedule; aggregation requires a shared forward process");
    if (models[i].mixture.dim() != models[0].mixture.dim())
      throw std::invalid_argument("aggregated models must share the latent dimension");
    if (!models[i].mixture.has_condition(conditions[i].label))
      throw std::invalid_argument("unknown condition '" + conditions[i].label + "' for model " + std::to_string(i + 1));
  }
  validate_substeps(schedule, substeps);
  const int total = static_cast<int>(substeps.size());
  if (agg.steps < 0 || agg.steps > total) throw std::invalid_argument("aggregation steps must be in [0, #substeps]");
  if (agg.stage_offset < 0 || agg.stage_offset + agg.steps > total)
    throw std::invalid_argument("aggregation window exceeds the substep ladder");
  if (agg.weights.size() + 1 != n_models) throw std::invalid_argument("aggregation needs N - 1 weights");
  for (double w : agg.weights)
    if (w < 0.0 || w > 1.0) throw std::invalid_argument("aggregation weights must lie in [0, 1]");
  if (agg.etas.size() != n_models) throw std::invalid_argument("aggregation needs one eta per model");
  for (double e : agg.etas)
    if (e < 0.0) throw std::invalid_argument("deviation step sizes must be non-negative");
}

StepStats pair_stats(int t, std::span<const Vector> latents, const AggregationConfig& agg, double shell_dev) {
  StepStats row;
  row.t = t;
  for (const auto& z : latents) row.norm_per_model.push_back(z.norm());
  const auto geom = theory_stats(latents[0], latents[1], agg.weights[0], agg.etas[0]);
  row.phi = geom.phi;
  row.diff_norm = geom.delta;
  row.d = geom.d;
  row.norm_diff = std::abs(row.norm_per_model[0] - row.norm_per_model[1]);
  row.shell_dev = shell_dev;
  return row;
}

}  // namespace

double angle_between(const Vector& a, const Vector& b) {
  require_same_dim(a, b, "angle_between");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("angle_between: zero-length vector");
  // Equal to acos of the clamped normalized dot product, but accurate near 0 and pi.
  const Vector ua = a / na;
  const Vector ub = b / nb;
  return 2.0 * std::atan2((ua - ub).norm(), (ua + ub).norm());
}

Vector slerp(const Vector& a, const Vector& b, double w) {
  require_same_dim(a, b, "slerp");
  if (w < 0.0 || w > 1.0) throw std::invalid_argument("slerp weight must lie in [0, 1]");
  const double phi = angle_between(a, b);
  if (w == 0.0) return a;
  if (w == 1.0) return b;
  if (phi < kParallelAngle) return (1.0 - w) * a + w * b;
  if (std::numbers::pi - phi < kParallelAngle) throw std::domain_error("slerp: antipodal inputs");
  const double s = std::sin(phi);
  return (std::sin((1.0 - w) * phi) / s) * a + (std::sin(w * phi) / s) * b;
}

Vector slerp_many(std::span<const Vector> vectors, std::span<const double> weights) {
  require_fold_shape(vectors, weights);
  Vector acc = vectors[0];
  for (std::size_t i = 0; i < weights.size(); ++i) acc = slerp(acc, vectors[i + 1], weights[i]);
  return acc;
}

Vector lerp_many(std::span<const Vector> vectors, std::span<const double> weights) {
  require_fold_shape(vectors, weights);
  Vector acc = vectors[0];
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require_same_dim(acc, vectors[i + 1], "lerp_many");
    const double w = weights[i];
    if (w < 0.0 || w > 1.0) throw std::invalid_argument("lerp weight must lie in [0, 1]");
    acc = (1.0 - w) * acc + w * vectors[i + 1];
  }
  return acc;
}

Vector deviation_optimize(const Vector& z_agg, const Vector& mu, double eta) {
  require_same_dim(z_agg, mu, "deviation_optimize");
  if (eta < 0.0) throw std::invalid_argument("deviation step must be non-negative");
  if (eta == 0.0) return z_agg;
  const Vector offset = z_agg - mu;
  const double dist = offset.norm();
  if (eta >= dist) throw std::domain_error("deviation step would reach or cross the reverse mean");
  return z_agg - (eta / dist) * offset;
}

AmdmResult amdm_sample(std::span<const DiffusionModel> models, std::span<const Condition> conditions,
                       const NoiseSchedule& schedule, std::span<const int> substeps, double eta_sampler,
                       const AggregationConfig& agg, std::uint64_t seed) {
  validate_models(models, conditions, schedule, substeps, agg);
  const std::size_t n_models = models.size();
  const auto ladder = reverse_ladder(substeps);
  const std::size_t window_begin = static_cast<std::size_t>(agg.stage_offset);
  const std::size_t window_end = window_begin + static_cast<std::size_t>(agg.steps);

  std::vector<RngStream> rngs;
  rngs.reserve(n_models);
  for (std::size_t i = 0; i < n_models; ++i) rngs.emplace_back(seed, i);

  const auto& lead = models[0].mixture;
  const Eigen::Index dim = lead.dim();
  std::vector<LatentState> states;
  states.push_back({rngs[0].normal_vector(dim), ladder.front()});

  AmdmResult result;
  auto& traj = result.trajectory;
  traj.seed = seed;
  traj.states.reserve(ladder.size());
  traj.states.push_back(states[0]);

  auto aggregate = [&](std::span<const Vector> latents) {
    return agg.kind == AggregationKind::kSpherical ? slerp_many(latents, agg.weights)
                                                   : lerp_many(latents, agg.weights);
  };

  VectorList latents(n_models);
  std::vector<ReverseKernel> kernels(n_models);
  for (std::size_t k = 0; k + 1 < ladder.size(); ++k) {
    const int t_prev = ladder[k + 1];
    const bool in_window = k >= window_begin && k < window_end;

    if (!in_window) {
      states[0] = reverse_step(schedule, lead, states[0], t_prev, conditions[0], eta_sampler, rngs[0]);
      traj.states.push_back(states[0]);
      continue;
    }

    if (k == window_begin) {
      // Other models join at the window entry: fresh N(0, I) draws at T,
      // model 1's current latent otherwise.
      for (std::size_t i = 1; i < n_models; ++i)
        states.push_back(k == 0 ? LatentState{rngs[i].normal_vector(dim), ladder.front()} : states[0]);
      for (std::size_t i = 0; i < n_models; ++i) latents[i] = states[i].z;
      const double r = expected_radius(lead, schedule, ladder[k], conditions[0]);
      traj.stats.push_back(pair_stats(ladder[k], latents, agg, shell_deviation(states[0].z, r)));
    }

    for (std::size_t i = 0; i < n_models; ++i) {
      kernels[i] = reverse_kernel(schedule, models[i].mixture, states[i], t_prev, conditions[i], eta_sampler);
      latents[i] = kernels[i].mean;
      if (kernels[i].sigma > 0.0) latents[i] += kernels[i].sigma * rngs[i].normal_vector(dim);
    }

    const Vector merged = aggregate(latents);
    const double r = expected_radius(lead, schedule, t_prev, conditions[0]);
    traj.stats.push_back(pair_stats(t_prev, latents, agg, shell_deviation(merged, r)));

    for (std::size_t i = 0; i < n_models; ++i) {
      states[i].t = t_prev;
      const double step = agg.etas[i];
      if (agg.overshoot == OvershootPolicy::kSkip && step >= (merged - kernels[i].mean).norm() && step > 0.0) {
        states[i].z = merged;
        ++result.skipped_optimizations;
        continue;
      }
      states[i].z = deviation_optimize(merged, kernels[i].mean, step);
    }
    traj.states.push_back(states[0]);
  }
  return result;
}

AmdmResult linear_amdm_sample(std::span<const DiffusionModel> models, std::span<const Condition> conditions,
                              const NoiseSchedule& schedule, std::span<const int> substeps, double eta_sampler,
                              const AggregationConfig& agg, std::uint64_t seed) {
  AggregationConfig linear = agg;
  linear.kind = AggregationKind::kLinear;
  return amdm_sample(models, conditions, schedule, substeps, eta_sampler, linear, seed);
}

double chord_ratio(double phi, double w) {
  if (phi < kParallelAngle) return 1.0 - w;
  return std::sin((1.0 - w) * phi / 2.0) / std::sin(phi / 2.0);
}

PairGeometry theory_stats(const Vector& z1, const Vector& z2, double w, double eta) {
  PairGeometry g;
  g.phi = angle_between(z1, z2);
  g.delta = (z1 - z2).norm();
  g.phi_w = chord_ratio(g.phi, w);
  g.d = g.phi_w * g.delta + eta;
  return g;
}

}  // namespace amdm
