#include "amdm/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace amdm {

namespace {

void validate(std::span<const DiffusionModel> models, std::span<const Condition> conditions,
              const NoiseSchedule& schedule) {
  if (models.empty()) throw std::invalid_argument("score composition needs at least one model");
  if (conditions.size() != models.size()) throw std::invalid_argument("one condition per model required");
  for (const auto& m : models) {
    if (!(m.schedule == schedule)) throw std::invalid_argument("composed models must share the noise schedule");
    if (m.mixture.dim() != models[0].mixture.dim()) throw std::invalid_argument("composed models must share dimension");
  }
}

}  // namespace

Vector product_score(std::span<const DiffusionModel> models, const NoiseSchedule& schedule, const Vector& z, int t,
                     std::span<const Condition> conditions) {
  validate(models, conditions, schedule);
  Vector total = noised_mixture(models[0].mixture, schedule, t, conditions[0]).score(z);
  for (std::size_t i = 1; i < models.size(); ++i)
    total += noised_mixture(models[i].mixture, schedule, t, conditions[i]).score(z);
  return total;
}

Vector langevin_correct(Vector z, const ScoreFn& score, double step_size, int n_steps, RngStream& rng) {
  if (!(step_size > 0.0)) throw std::invalid_argument("Langevin step size must be positive");
  if (n_steps < 0) throw std::invalid_argument("Langevin step count must be non-negative");
  const double noise = std::sqrt(step_size);
  for (int k = 0; k < n_steps; ++k) z += 0.5 * step_size * score(z) + noise * rng.normal_vector(z.size());
  return z;
}

Trajectory composed_sample(std::span<const DiffusionModel> models, std::span<const Condition> conditions,
                           const NoiseSchedule& schedule, std::span<const int> substeps, const LangevinConfig& cfg,
                           std::uint64_t seed) {
  validate(models, conditions, schedule);
  validate_substeps(schedule, substeps);
  RngStream chain(seed, 0);
  RngStream corrector(seed, 1);
  const auto ladder = reverse_ladder(substeps);
  const double floor_var = 1.0 - schedule.alpha_bar(substeps.front());

  Trajectory traj;
  traj.seed = seed;
  traj.states.push_back({chain.normal_vector(models[0].mixture.dim()), ladder.front()});
  for (std::size_t k = 1; k < ladder.size(); ++k) {
    const auto& cur = traj.states.back();
    const int t_prev = ladder[k];
    const double sigma = ddim_sigma(schedule, cur.t, t_prev, cfg.sampler_eta);
    const Vector eps = -std::sqrt(1.0 - schedule.alpha_bar(cur.t)) * product_score(models, schedule, cur.z, cur.t, conditions);
    Vector z = reverse_mean(schedule, eps, cur.z, cur.t, t_prev, sigma);
    if (sigma > 0.0) z += sigma * chain.normal_vector(z.size());
    if (cfg.enabled && cfg.steps_per_level > 0) {
      const double var = t_prev > 0 ? 1.0 - schedule.alpha_bar(t_prev) : floor_var;
      auto score = [&](const Vector& x) { return product_score(models, schedule, x, t_prev, conditions); };
      z = langevin_correct(std::move(z), score, cfg.step_scale * var, cfg.steps_per_level, corrector);
    }
    traj.states.push_back({std::move(z), t_prev});
  }
  return traj;
}

GaussianMixture product_of_mixtures(const GaussianMixture& a, const GaussianMixture& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("product_of_mixtures: dimension mismatch");
  const double n = static_cast<double>(a.dim());
  std::vector<Component> comps;
  std::vector<double> log_w;
  for (std::size_t i = 0; i < a.components().size(); ++i) {
    for (std::size_t j = 0; j < b.components().size(); ++j) {
      const auto& ci = a.components()[i];
      const auto& cj = b.components()[j];
      const double s = ci.variance + cj.variance;
      comps.push_back({(cj.variance * ci.mean + ci.variance * cj.mean) / s, ci.variance * cj.variance / s});
      // w_i w_j N(m_i; m_j, s I)
      log_w.push_back(std::log(a.weights()[i]) + std::log(b.weights()[j]) -
                      0.5 * n * std::log(2.0 * std::numbers::pi * s) - (ci.mean - cj.mean).squaredNorm() / (2.0 * s));
    }
  }
  const double top = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> weights;
  std::vector<Component> kept;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const double w = std::exp(log_w[k] - top);
    if (w > 0.0) {
      weights.push_back(w);
      kept.push_back(std::move(comps[k]));
    }
  }
  return GaussianMixture(std::move(kept), std::move(weights));
}

}  // namespace amdm
