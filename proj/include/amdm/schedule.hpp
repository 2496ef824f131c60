#pragma once

#include "amdm/types.hpp"

#include <span>
#include <vector>

namespace amdm {

/// Discrete variance-preserving forward process.
///
/// Timesteps are 1-based: t = 1..T index the noising steps and t = 0 is clean
/// data, so alpha_bar(0) == 1. The schedule is immutable once built.
class NoiseSchedule {
 public:
  /// Builds a schedule from explicit betas, each in (0, 1).
  explicit NoiseSchedule(std::vector<double> betas);

  /// Linear betas from beta_start to beta_end inclusive over `steps` steps.
  static NoiseSchedule linear(double beta_start, double beta_end, int steps);

  int steps() const { return static_cast<int>(betas_.size()); }

  double beta(int t) const;
  double alpha(int t) const;
  /// Cumulative product of alphas up to and including t; t in [0, T].
  double alpha_bar(int t) const;

  std::span<const double> betas() const { return betas_; }

  /// True when alpha_bar(T) is small enough for N(0, I) to stand in for the
  /// terminal marginal.
  bool has_gaussian_terminal(double tolerance = 1e-3) const { return alpha_bar(steps()) < tolerance; }

  friend bool operator==(const NoiseSchedule& a, const NoiseSchedule& b) { return a.betas_ == b.betas_; }

 private:
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;  // index 0 holds 1.0
};

/// Evenly strided accelerated-sampling ladder: {T/k, 2T/k, ..., T}, strictly
/// increasing and ending at T. The reverse chain walks it downwards and takes
/// a final step to t = 0.
std::vector<int> uniform_substeps(const NoiseSchedule& schedule, int count);

/// Throws std::invalid_argument unless `substeps` is strictly increasing,
/// within [1, T], and ends at T.
void validate_substeps(const NoiseSchedule& schedule, std::span<const int> substeps);

/// Descending timesteps visited by a reverse chain: T, ..., substeps[0], 0.
std::vector<int> reverse_ladder(std::span<const int> substeps);

/// Closed-form marginal q(z_t | z_0): sqrt(abar_t) z0 + sqrt(1 - abar_t) noise.
Vector forward_marginal(const NoiseSchedule& schedule, const Vector& z0, int t, const Vector& noise);

/// Standard deviation of the reverse step t -> t_prev, eta * sigma_DDPM.
/// eta = 0 is deterministic DDIM, eta = 1 the DDPM posterior variance.
double ddim_sigma(const NoiseSchedule& schedule, int t, int t_prev, double eta);

}  // namespace amdm
