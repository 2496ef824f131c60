#pragma once

#include "amdm/schedule.hpp"
#include "amdm/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace amdm {

/// Lower bound on P(| ||X|| - sqrt(n) sigma | <= eps sqrt(n) sigma) for
/// X ~ N(0, sigma^2 I_n): max(0, 1 - 2 exp(-n eps^2 / (1 + 2 eps))).
double concentration_lower_bound(int n, double epsilon);

/// Monte Carlo estimate of the shell probability bounded above.
double empirical_shell_fraction(int n, double sigma, double epsilon, int draws, std::uint64_t seed);

/// Shell fractions for several epsilons from one shared set of draws.
std::vector<double> empirical_shell_fractions(int n, double sigma, std::span<const double> epsilons, int draws,
                                              std::uint64_t seed);

/// Probability lower bound that a deviation-optimized latent lies in the
/// second model's generation domain. With a = eps_domain - d / (sigma_t sqrt(n))
/// returns 0 when a <= 0 and the concentration bound at a otherwise.
double membership_lower_bound(int n, double eps_domain, double d, double sigma_t);

/// Continuous-time rate beta(t) on t in [0, 1] for a discrete schedule.
///
/// Knots sit at t_k = (k - 1) / (T - 1) with value T * beta_k, so the
/// integral over [0, 1] approximates the sum of the discrete betas. Between
/// knots the rate is linear, which makes trapezoid integration on the knot
/// grid exact.
class ContinuousBeta {
 public:
  explicit ContinuousBeta(const NoiseSchedule& schedule);

  double rate(double t) const;
  /// Integral of rate over [0, t].
  double integral(double t) const;

 private:
  std::vector<double> knots_;       // rate at each knot
  std::vector<double> cumulative_;  // integral from 0 to each knot
  double spacing_ = 1.0;
};

/// Mean and per-coordinate variance of the VP-SDE marginal at time t.
struct MomentState {
  double t = 0.0;
  Vector m;
  Vector P;
};

/// m(t) = m0 exp(-B(t) / 2), P(t) = 1 + (P0 - 1) exp(-B(t)), B(t) = int_0^t beta.
MomentState moment_closed_form(const Vector& m0, const Vector& P0, double t, const NoiseSchedule& schedule);

/// Classical RK4 on dm/dt = -beta m / 2, dP/dt = -beta P + beta. The last
/// step is shortened to land on t_end.
MomentState moment_ode_integrate(const Vector& m0, const Vector& P0, double t_end, double step,
                                 const NoiseSchedule& schedule);

}  // namespace amdm
