#pragma once

#include "amdm/mixture.hpp"
#include "amdm/schedule.hpp"
#include "amdm/types.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace amdm {

/// | ||z|| - r | / r.
double shell_deviation(const Vector& z, double expected_radius);

/// sqrt(E ||z||^2) of a mixture.
double expected_radius(const GaussianMixture& mixture);

/// Expected radius of the noised conditional marginal p_t(z | y).
double expected_radius(const MixtureModel& model, const NoiseSchedule& schedule, int t, const Condition& condition);

/// Generation domain {z : log p_t(z | y) >= tau} with tau calibrated as the
/// `quantile` level of log p_t over exact draws from p_t(. | y).
class DomainTest {
 public:
  DomainTest(const MixtureModel& model, const NoiseSchedule& schedule, int t, Condition condition, double quantile,
             int calibration_draws, std::uint64_t seed);

  bool contains(const Vector& z) const { return density_.log_density(z) >= threshold_; }
  double threshold() const { return threshold_; }

 private:
  GaussianMixture density_;
  double threshold_;
};

/// Fraction of samples inside the calibrated generation domain.
double membership_rate(std::span<const Vector> samples, const MixtureModel& model, const NoiseSchedule& schedule,
                       int t, const Condition& condition, double quantile, int calibration_draws, std::uint64_t seed);

/// Fraction of samples that lie in every listed domain simultaneously.
double joint_membership_rate(std::span<const Vector> samples, std::span<const DomainTest> domains);

/// Unbiased U-statistic estimate of MMD^2 with kernel exp(-||x - y||^2 / (2 h^2)).
/// Equal-size sets use the paired statistic whose cross terms skip i == j.
/// Requires at least two points per set.
double mmd_rbf(std::span<const Vector> xs, std::span<const Vector> ys, double bandwidth);

/// Median pairwise distance over the pooled sample.
double median_bandwidth(std::span<const Vector> xs, std::span<const Vector> ys);

double avg_log_likelihood(std::span<const Vector> samples, const std::function<double(const Vector&)>& log_density);

/// Mean over coordinates of the unbiased per-coordinate sample variance.
double sample_variance_scalar(std::span<const Vector> samples);

}  // namespace amdm
