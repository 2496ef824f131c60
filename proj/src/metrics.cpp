#include "amdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amdm {

double shell_deviation(const Vector& z, double expected_radius) {
  if (!(expected_radius > 0.0)) throw std::invalid_argument("shell_deviation: expected radius must be positive");
  return std::abs(z.norm() - expected_radius) / expected_radius;
}

double expected_radius(const GaussianMixture& mixture) { return std::sqrt(mixture.second_moment()); }

double expected_radius(const MixtureModel& model, const NoiseSchedule& schedule, int t, const Condition& condition) {
  return expected_radius(noised_mixture(model, schedule, t, condition));
}

DomainTest::DomainTest(const MixtureModel& model, const NoiseSchedule& schedule, int t, Condition condition,
                       double quantile, int calibration_draws, std::uint64_t seed)
    : density_(noised_mixture(model, schedule, t, condition)), threshold_(0.0) {
  if (!(quantile > 0.0 && quantile < 1.0)) throw std::invalid_argument("membership quantile must be in (0, 1)");
  if (calibration_draws < 1) throw std::invalid_argument("membership calibration needs at least one draw");
  RngStream rng(seed, 0x5eed);
  std::vector<double> logs(static_cast<std::size_t>(calibration_draws));
  for (auto& l : logs) l = density_.log_density(density_.sample(rng));
  // Lower empirical quantile: the k-th smallest value with k = floor(q * m).
  const auto k = static_cast<std::size_t>(std::floor(quantile * static_cast<double>(logs.size())));
  std::nth_element(logs.begin(), logs.begin() + static_cast<std::ptrdiff_t>(k), logs.end());
  threshold_ = logs[k];
}

double membership_rate(std::span<const Vector> samples, const MixtureModel& model, const NoiseSchedule& schedule,
                       int t, const Condition& condition, double quantile, int calibration_draws,
                       std::uint64_t seed) {
  if (samples.empty()) throw std::invalid_argument("membership_rate: empty sample set");
  const DomainTest domain(model, schedule, t, condition, quantile, calibration_draws, seed);
  std::size_t inside = 0;
  for (const auto& z : samples) inside += domain.contains(z) ? 1 : 0;
  return static_cast<double>(inside) / static_cast<double>(samples.size());
}

double joint_membership_rate(std::span<const Vector> samples, std::span<const DomainTest> domains) {
  if (samples.empty()) throw std::invalid_argument("joint_membership_rate: empty sample set");
  std::size_t inside = 0;
  for (const auto& z : samples)
    inside += std::all_of(domains.begin(), domains.end(), [&](const DomainTest& d) { return d.contains(z); }) ? 1 : 0;
  return static_cast<double>(inside) / static_cast<double>(samples.size());
}

double mmd_rbf(std::span<const Vector> xs, std::span<const Vector> ys, double bandwidth) {
  if (xs.size() < 2 || ys.size() < 2) throw std::invalid_argument("mmd_rbf needs at least two points per set");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("mmd_rbf bandwidth must be positive");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  auto k = [inv](const Vector& a, const Vector& b) { return std::exp(-(a - b).squaredNorm() * inv); };
  const double m = static_cast<double>(xs.size());
  const double n = static_cast<double>(ys.size());

  double kxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j) kxx += k(xs[i], xs[j]);
  double kyy = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i)
    for (std::size_t j = i + 1; j < ys.size(); ++j) kyy += k(ys[i], ys[j]);
  if (xs.size() == ys.size()) {
    // Paired form: cross terms skip i == j, so identical multisets give exactly 0.
    double kxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = 0; j < ys.size(); ++j)
        if (i != j) kxy += k(xs[i], ys[j]);
    return (2.0 * kxx + 2.0 * kyy - 2.0 * kxy) / (m * (m - 1.0));
  }
  double kxy = 0.0;
  for (const auto& x : xs)
    for (const auto& y : ys) kxy += k(x, y);
  return 2.0 * kxx / (m * (m - 1.0)) + 2.0 * kyy / (n * (n - 1.0)) - 2.0 * kxy / (m * n);
}

double median_bandwidth(std::span<const Vector> xs, std::span<const Vector> ys) {
  std::vector<const Vector*> pooled;
  pooled.reserve(xs.size() + ys.size());
  for (const auto& x : xs) pooled.push_back(&x);
  for (const auto& y : ys) pooled.push_back(&y);
  if (pooled.size() < 2) throw std::invalid_argument("median_bandwidth needs at least two points");
  std::vector<double> dists;
  dists.reserve(pooled.size() * (pooled.size() - 1) / 2);
  for (std::size_t i = 0; i < pooled.size(); ++i)
    for (std::size_t j = i + 1; j < pooled.size(); ++j) dists.push_back((*pooled[i] - *pooled[j]).norm());
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid;
}

double avg_log_likelihood(std::span<const Vector> samples, const std::function<double(const Vector&)>& log_density) {
  if (samples.empty()) throw std::invalid_argument("avg_log_likelihood: empty sample set");
  double acc = 0.0;
  for (const auto& z : samples) acc += log_density(z);
  return acc / static_cast<double>(samples.size());
}

double sample_variance_scalar(std::span<const Vector> samples) {
  if (samples.size() < 2) throw std::invalid_argument("sample_variance_scalar needs at least two samples");
  const Eigen::Index dim = samples.front().size();
  Vector mean = Vector::Zero(dim);
  for (const auto& z : samples) mean += z;
  mean /= static_cast<double>(samples.size());
  double ss = 0.0;
  for (const auto& z : samples) ss += (z - mean).squaredNorm();
  return ss / (static_cast<double>(samples.size() - 1) * static_cast<double>(dim));
}

}  // namespace amdm
