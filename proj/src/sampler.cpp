#include "amdm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amdm {

Vector reverse_mean(const NoiseSchedule& schedule, const Vector& epsilon, const Vector& z, int t, int t_prev,
                    double sigma) {
  if (epsilon.size() != z.size()) throw std::invalid_argument("reverse_mean: dimension mismatch");
  if (t_prev >= t) throw std::invalid_argument("reverse_mean requires t_prev < t");
  if (sigma < 0.0) throw std::invalid_argument("reverse_mean requires sigma >= 0");
  const double ab_t = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t_prev);
  const double residual = 1.0 - ab_prev - sigma * sigma;
  // Tolerate rounding at t_prev = 0 where 1 - abar_prev is exactly zero.
  if (residual < -1e-12) throw std::domain_error("reverse_mean: sigma^2 exceeds 1 - abar_prev");
  const double eps_coef = std::sqrt(std::max(residual, 0.0)) - std::sqrt(ab_prev * (1.0 - ab_t) / ab_t);
  return std::sqrt(ab_prev / ab_t) * z + eps_coef * epsilon;
}

ReverseKernel reverse_kernel(const NoiseSchedule& schedule, const MixtureModel& model, const LatentState& state,
                             int t_prev, const Condition& condition, double eta) {
  if (state.t <= t_prev || t_prev < 0) throw std::invalid_argument("reverse step requires state.t > t_prev >= 0");
  const double sigma = ddim_sigma(schedule, state.t, t_prev, eta);
  const Vector eps = cfg_epsilon(model, schedule, state.z, state.t, condition);
  return {reverse_mean(schedule, eps, state.z, state.t, t_prev, sigma), sigma};
}

LatentState reverse_step(const NoiseSchedule& schedule, const MixtureModel& model, const LatentState& state,
                         int t_prev, const Condition& condition, double eta, RngStream& rng) {
  auto kernel = reverse_kernel(schedule, model, state, t_prev, condition, eta);
  if (kernel.sigma > 0.0) kernel.mean += kernel.sigma * rng.normal_vector(kernel.mean.size());
  return {std::move(kernel.mean), t_prev};
}

Trajectory sample(const MixtureModel& model, const NoiseSchedule& schedule, const Condition& condition,
                  std::span<const int> substeps, double eta, std::uint64_t seed) {
  validate_substeps(schedule, substeps);
  RngStream rng(seed, 0);
  Trajectory traj;
  traj.seed = seed;
  const auto ladder = reverse_ladder(substeps);
  traj.states.reserve(ladder.size());
  traj.states.push_back({rng.normal_vector(model.dim()), ladder.front()});
  for (std::size_t k = 1; k < ladder.size(); ++k)
    traj.states.push_back(reverse_step(schedule, model, traj.states.back(), ladder[k], condition, eta, rng));
  return traj;
}

}  // namespace amdm
