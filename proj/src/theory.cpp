#include "amdm/theory.hpp"

#include "amdm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amdm {

double concentration_lower_bound(int n, double epsilon) {
  if (n < 1) throw std::invalid_argument("concentration bound needs n >= 1");
  if (epsilon < 0.0) throw std::invalid_argument("concentration bound needs epsilon >= 0");
  const double tail = 2.0 * std::exp(-static_cast<double>(n) * epsilon * epsilon / (1.0 + 2.0 * epsilon));
  return std::max(0.0, 1.0 - tail);
}

std::vector<double> empirical_shell_fractions(int n, double sigma, std::span<const double> epsilons, int draws,
                                              std::uint64_t seed) {
  if (n < 1 || draws < 1) throw std::invalid_argument("shell fraction needs n >= 1 and draws >= 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("shell fraction needs sigma > 0");
  RngStream rng(seed, 0);
  const double radius = std::sqrt(static_cast<double>(n)) * sigma;
  std::vector<long> hits(epsilons.size(), 0);
  for (int k = 0; k < draws; ++k) {
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = sigma * rng.normal();
      ss += x * x;
    }
    const double gap = std::abs(std::sqrt(ss) - radius);
    for (std::size_t e = 0; e < epsilons.size(); ++e) hits[e] += gap <= epsilons[e] * radius ? 1 : 0;
  }
  std::vector<double> out(epsilons.size());
  for (std::size_t e = 0; e < epsilons.size(); ++e) out[e] = static_cast<double>(hits[e]) / draws;
  return out;
}

double empirical_shell_fraction(int n, double sigma, double epsilon, int draws, std::uint64_t seed) {
  const double eps[] = {epsilon};
  return empirical_shell_fractions(n, sigma, eps, draws, seed).front();
}

double membership_lower_bound(int n, double eps_domain, double d, double sigma_t) {
  if (n < 1) throw std::invalid_argument("membership bound needs n >= 1");
  if (eps_domain < 0.0 || d < 0.0 || sigma_t < 0.0)
    throw std::invalid_argument("membership bound needs non-negative eps, d and sigma_t");
  if (d == 0.0) return concentration_lower_bound(n, eps_domain);
  if (sigma_t == 0.0) return 0.0;
  const double a = eps_domain - d / (sigma_t * std::sqrt(static_cast<double>(n)));
  if (a <= 0.0) return 0.0;
  return concentration_lower_bound(n, a);
}

ContinuousBeta::ContinuousBeta(const NoiseSchedule& schedule) {
  const int T = schedule.steps();
  knots_.reserve(static_cast<std::size_t>(T));
  for (double b : schedule.betas()) knots_.push_back(static_cast<double>(T) * b);
  spacing_ = T > 1 ? 1.0 / (T - 1) : 1.0;
  cumulative_.assign(knots_.size(), 0.0);
  for (std::size_t k = 1; k < knots_.size(); ++k)
    cumulative_[k] = cumulative_[k - 1] + 0.5 * spacing_ * (knots_[k - 1] + knots_[k]);
}

double ContinuousBeta::rate(double t) const {
  if (knots_.size() == 1) return knots_[0];
  const double x = std::clamp(t, 0.0, 1.0) / spacing_;
  const auto k = std::min(static_cast<std::size_t>(x), knots_.size() - 2);
  const double frac = x - static_cast<double>(k);
  return knots_[k] + frac * (knots_[k + 1] - knots_[k]);
}

double ContinuousBeta::integral(double t) const {
  if (t < 0.0 || t > 1.0 + 1e-12) throw std::out_of_range("continuous time must lie in [0, 1]");
  if (knots_.size() == 1) return knots_[0] * t;
  const double x = std::min(t, 1.0) / spacing_;
  const auto k = std::min(static_cast<std::size_t>(x), knots_.size() - 2);
  const double h = (x - static_cast<double>(k)) * spacing_;
  return cumulative_[k] + 0.5 * h * (knots_[k] + rate(t));
}

MomentState moment_closed_form(const Vector& m0, const Vector& P0, double t, const NoiseSchedule& schedule) {
  if (m0.size() != P0.size()) throw std::invalid_argument("moment state: dimension mismatch");
  if ((P0.array() < 0.0).any()) throw std::invalid_argument("moment state: variances must be non-negative");
  const double B = ContinuousBeta(schedule).integral(t);
  MomentState s;
  s.t = t;
  s.m = m0 * std::exp(-0.5 * B);
  s.P = (Vector::Ones(P0.size()) + (P0 - Vector::Ones(P0.size())) * std::exp(-B));
  return s;
}

MomentState moment_ode_integrate(const Vector& m0, const Vector& P0, double t_end, double step,
                                 const NoiseSchedule& schedule) {
  if (!(step > 0.0)) throw std::invalid_argument("integration step must be positive");
  if (t_end < 0.0 || t_end > 1.0) throw std::out_of_range("continuous time must lie in [0, 1]");
  if (m0.size() != P0.size()) throw std::invalid_argument("moment state: dimension mismatch");
  const ContinuousBeta beta(schedule);
  const Vector ones = Vector::Ones(P0.size());
  auto dm = [&](double t, const Vector& m) -> Vector { return -0.5 * beta.rate(t) * m; };
  auto dP = [&](double t, const Vector& P) -> Vector { return beta.rate(t) * (ones - P); };

  MomentState s{0.0, m0, P0};
  const auto full_steps = static_cast<long>(std::floor(t_end / step * (1.0 + 1e-12)));
  auto advance = [&](double h) {
    const double t = s.t;
    const Vector km1 = dm(t, s.m), kp1 = dP(t, s.P);
    const Vector km2 = dm(t + h / 2, s.m + h / 2 * km1), kp2 = dP(t + h / 2, s.P + h / 2 * kp1);
    const Vector km3 = dm(t + h / 2, s.m + h / 2 * km2), kp3 = dP(t + h / 2, s.P + h / 2 * kp2);
    const Vector km4 = dm(t + h, s.m + h * km3), kp4 = dP(t + h, s.P + h * kp3);
    s.m += h / 6 * (km1 + 2 * km2 + 2 * km3 + km4);
    s.P += h / 6 * (kp1 + 2 * kp2 + 2 * kp3 + kp4);
  };
  for (long i = 0; i < full_steps; ++i) {
    advance(step);
    s.t = static_cast<double>(i + 1) * step;
  }
  const double rest = t_end - s.t;
  if (rest > 1e-15) advance(rest);
  s.t = t_end;
  return s;
}

}  // namespace amdm
