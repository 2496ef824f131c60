#include "amdm/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace amdm {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw std::invalid_argument("noise schedule needs at least one step");
  alphas_.reserve(betas_.size());
  alpha_bars_.reserve(betas_.size() + 1);
  alpha_bars_.push_back(1.0);
  for (double b : betas_) {
    if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("beta must lie in (0, 1), got " + std::to_string(b));
    alphas_.push_back(1.0 - b);
    alpha_bars_.push_back(alpha_bars_.back() * alphas_.back());
  }
}

NoiseSchedule NoiseSchedule::linear(double beta_start, double beta_end, int steps) {
  if (steps < 1) throw std::invalid_argument("schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw std::invalid_argument("linear schedule requires 0 < beta_start <= beta_end < 1");
  std::vector<double> betas(static_cast<std::size_t>(steps));
  if (steps == 1) {
    betas[0] = beta_start;
  } else {
    const double span = beta_end - beta_start;
    for (int i = 0; i < steps; ++i) betas[i] = beta_start + span * static_cast<double>(i) / (steps - 1);
    betas.back() = beta_end;
  }
  return NoiseSchedule(std::move(betas));
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > steps()) throw std::out_of_range("timestep out of range");
  return betas_[t - 1];
}

double NoiseSchedule::alpha(int t) const {
  if (t < 1 || t > steps()) throw std::out_of_range("timestep out of range");
  return alphas_[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps()) throw std::out_of_range("timestep out of range");
  return alpha_bars_[t];
}

std::vector<int> uniform_substeps(const NoiseSchedule& schedule, int count) {
  const int T = schedule.steps();
  if (count < 1 || count > T) throw std::invalid_argument("substep count must be in [1, T]");
  std::vector<int> out(static_cast<std::size_t>(count));
  for (int k = 1; k <= count; ++k) {
    // Integer rounding of k*T/count; exact when count divides T.
    out[k - 1] = static_cast<int>((static_cast<long long>(k) * T + count / 2) / count);
  }
  out.back() = T;
  return out;
}

void validate_substeps(const NoiseSchedule& schedule, std::span<const int> substeps) {
  if (substeps.empty()) throw std::invalid_argument("substep ladder is empty");
  int prev = 0;
  for (int t : substeps) {
    if (t <= prev) throw std::invalid_argument("substeps must be strictly increasing and >= 1");
    prev = t;
  }
  if (substeps.back() != schedule.steps()) throw std::invalid_argument("substeps must end at the terminal timestep");
}

std::vector<int> reverse_ladder(std::span<const int> substeps) {
  std::vector<int> ladder(substeps.rbegin(), substeps.rend());
  ladder.push_back(0);
  return ladder;
}

Vector forward_marginal(const NoiseSchedule& schedule, const Vector& z0, int t, const Vector& noise) {
  if (z0.size() != noise.size()) throw std::invalid_argument("forward_marginal: dimension mismatch");
  if (t < 1 || t > schedule.steps()) throw std::out_of_range("forward_marginal: timestep out of range");
  const double ab = schedule.alpha_bar(t);
  return std::sqrt(ab) * z0 + std::sqrt(1.0 - ab) * noise;
}

double ddim_sigma(const NoiseSchedule& schedule, int t, int t_prev, double eta) {
  if (t_prev >= t) throw std::invalid_argument("ddim_sigma requires t_prev < t");
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("ddim_sigma requires eta in [0, 1]");
  if (eta == 0.0) return 0.0;
  const double ab_t = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t_prev);
  const double var = (1.0 - ab_prev) / (1.0 - ab_t) * (1.0 - ab_t / ab_prev);
  return eta * std::sqrt(std::max(var, 0.0));
}

}  // namespace amdm
