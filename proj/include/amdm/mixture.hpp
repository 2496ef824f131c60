#pragma once

#include "amdm/rng.hpp"
#include "amdm/schedule.hpp"
#include "amdm/types.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace amdm {

/// Isotropic Gaussian component N(mean, variance * I).
struct Component {
  Vector mean;
  double variance = 1.0;
};

/// A condition selects a component subset of a MixtureModel. The guidance
/// scale mixes conditional and unconditional noise predictions.
struct Condition {
  std::string label;
  double guidance_scale = 0.0;
};

/// Label that every MixtureModel maps to its full component set.
inline constexpr std::string_view kUnconditional = "uncond";

/// Plain mixture of isotropic Gaussians with normalized weights. All density
/// and score evaluations are exact.
class GaussianMixture {
 public:
  GaussianMixture(std::vector<Component> components, std::vector<double> weights);

  Eigen::Index dim() const { return components_.front().mean.size(); }
  const std::vector<Component>& components() const { return components_; }
  const std::vector<double>& weights() const { return weights_; }

  double log_density(const Vector& z) const;
  /// Gradient of log_density.
  Vector score(const Vector& z) const;
  /// Posterior component responsibilities at z.
  std::vector<double> responsibilities(const Vector& z) const;

  /// Pushforward through the forward marginal with cumulative alpha `alpha_bar`.
  GaussianMixture noised(double alpha_bar) const;

  Vector sample(RngStream& rng) const;

  Vector mean() const;
  /// Per-coordinate variance (within plus between component spread).
  Vector coordinate_variance() const;
  /// E ||z||^2.
  double second_moment() const;

 private:
  std::vector<double> log_weighted_densities(const Vector& z) const;

  std::vector<Component> components_;
  std::vector<double> weights_;
};

/// Conditional data distribution p(z_0 | y): a weighted component list plus
/// a map from condition label to component subset. Immutable.
class MixtureModel {
 public:
  MixtureModel(std::vector<Component> components, std::vector<double> weights,
               std::map<std::string, std::vector<std::size_t>> condition_map);

  Eigen::Index dim() const { return full_.dim(); }
  const GaussianMixture& unconditional() const { return full_; }
  const std::map<std::string, std::vector<std::size_t>>& condition_map() const { return condition_map_; }
  bool has_condition(const std::string& label) const { return condition_map_.contains(label); }

  /// Probability mass the full mixture assigns to the condition's components.
  double condition_mass(const std::string& label) const;

  /// The clean-data conditional mixture, weights renormalized.
  const GaussianMixture& conditional(const std::string& label) const;

 private:
  GaussianMixture full_;
  std::map<std::string, std::vector<std::size_t>> condition_map_;
  std::map<std::string, GaussianMixture> conditionals_;
};

/// Conditional mixture pushed through the forward process to time t (t = 0
/// returns the clean conditional mixture).
GaussianMixture noised_mixture(const MixtureModel& model, const NoiseSchedule& schedule, int t,
                               const Condition& condition);

double log_density(const MixtureModel& model, const NoiseSchedule& schedule, const Vector& z, int t,
                   const Condition& condition);

/// Exact noise prediction eps = -sqrt(1 - abar_t) * grad log p_t(z | y).
Vector epsilon_pred(const MixtureModel& model, const NoiseSchedule& schedule, const Vector& z, int t,
                    const Condition& condition);

/// Classifier-free guided prediction (1 + g) eps(z | y) - g eps(z).
Vector cfg_epsilon(const MixtureModel& model, const NoiseSchedule& schedule, const Vector& z, int t,
                   const Condition& condition);

}  // namespace amdm
