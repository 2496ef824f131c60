#include "amdm/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace amdm {

namespace {

double log_sum_exp(const std::vector<double>& xs) {
  const double top = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - top);
  return top + std::log(acc);
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<Component> components, std::vector<double> weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty()) throw std::invalid_argument("mixture needs at least one component");
  if (components_.size() != weights_.size()) throw std::invalid_argument("one weight per component required");
  const Eigen::Index n = components_.front().mean.size();
  if (n < 1) throw std::invalid_argument("mixture dimension must be positive");
  double total = 0.0;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    if (components_[k].mean.size() != n) throw std::invalid_argument("component dimensions differ");
    if (!(components_[k].variance > 0.0)) throw std::invalid_argument("component variance must be positive");
    if (!(weights_[k] > 0.0)) throw std::invalid_argument("mixture weights must be positive");
    total += weights_[k];
  }
  for (double& w : weights_) w /= total;
}

std::vector<double> GaussianMixture::log_weighted_densities(const Vector& z) const {
  if (z.size() != dim()) throw std::invalid_argument("mixture: dimension mismatch");
  const double n = static_cast<double>(dim());
  std::vector<double> out(components_.size());
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    out[k] = std::log(weights_[k]) - 0.5 * n * std::log(2.0 * std::numbers::pi * c.variance) -
             (z - c.mean).squaredNorm() / (2.0 * c.variance);
  }
  return out;
}

double GaussianMixture::log_density(const Vector& z) const { return log_sum_exp(log_weighted_densities(z)); }

std::vector<double> GaussianMixture::responsibilities(const Vector& z) const {
  auto logs = log_weighted_densities(z);
  const double norm = log_sum_exp(logs);
  for (double& l : logs) l = std::exp(l - norm);
  return logs;
}

Vector GaussianMixture::score(const Vector& z) const {
  const auto r = responsibilities(z);
  Vector g = Vector::Zero(dim());
  for (std::size_t k = 0; k < components_.size(); ++k) {
    if (r[k] == 0.0) continue;
    g += (r[k] / components_[k].variance) * (components_[k].mean - z);
  }
  return g;
}

GaussianMixture GaussianMixture::noised(double alpha_bar) const {
  const double scale = std::sqrt(alpha_bar);
  std::vector<Component> out;
  out.reserve(components_.size());
  for (const auto& c : components_) out.push_back({scale * c.mean, alpha_bar * c.variance + (1.0 - alpha_bar)});
  return GaussianMixture(std::move(out), weights_);
}

Vector GaussianMixture::sample(RngStream& rng) const {
  const double u = rng.uniform();
  std::size_t k = 0;
  double acc = weights_[0];
  while (u >= acc && k + 1 < weights_.size()) acc += weights_[++k];
  const auto& c = components_[k];
  return c.mean + std::sqrt(c.variance) * rng.normal_vector(dim());
}

Vector GaussianMixture::mean() const {
  Vector m = Vector::Zero(dim());
  for (std::size_t k = 0; k < components_.size(); ++k) m += weights_[k] * components_[k].mean;
  return m;
}

Vector GaussianMixture::coordinate_variance() const {
  const Vector m = mean();
  Vector v = Vector::Zero(dim());
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    v += weights_[k] * ((c.mean - m).array().square().matrix() + Vector::Constant(dim(), c.variance));
  }
  return v;
}

double GaussianMixture::second_moment() const {
  double acc = 0.0;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    acc += weights_[k] * (c.mean.squaredNorm() + static_cast<double>(dim()) * c.variance);
  }
  return acc;
}

MixtureModel::MixtureModel(std::vector<Component> components, std::vector<double> weights,
                           std::map<std::string, std::vector<std::size_t>> condition_map)
    : full_(components, weights), condition_map_(std::move(condition_map)) {
  std::vector<std::size_t> all(full_.components().size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (auto it = condition_map_.find(std::string(kUnconditional)); it != condition_map_.end()) {
    auto sorted = it->second;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != all) throw std::invalid_argument("the unconditional label must cover every component");
  }
  condition_map_[std::string(kUnconditional)] = all;

  for (auto& [label, idx] : condition_map_) {
    if (idx.empty()) throw std::invalid_argument("condition '" + label + "' selects no components");
    std::sort(idx.begin(), idx.end());
    if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
      throw std::invalid_argument("condition '" + label + "' repeats a component");
    std::vector<Component> comps;
    std::vector<double> ws;
    for (std::size_t k : idx) {
      if (k >= all.size()) throw std::invalid_argument("condition '" + label + "' references a missing component");
      comps.push_back(full_.components()[k]);
      ws.push_back(full_.weights()[k]);
    }
    conditionals_.emplace(label, GaussianMixture(std::move(comps), std::move(ws)));
  }
}

double MixtureModel::condition_mass(const std::string& label) const {
  auto it = condition_map_.find(label);
  if (it == condition_map_.end()) throw std::invalid_argument("unknown condition '" + label + "'");
  double mass = 0.0;
  for (std::size_t k : it->second) mass += full_.weights()[k];
  return mass;
}

const GaussianMixture& MixtureModel::conditional(const std::string& label) const {
  auto it = conditionals_.find(label);
  if (it == conditionals_.end()) throw std::invalid_argument("unknown condition '" + label + "'");
  return it->second;
}

GaussianMixture noised_mixture(const MixtureModel& model, const NoiseSchedule& schedule, int t,
                               const Condition& condition) {
  const auto& clean = model.conditional(condition.label);
  if (t == 0) return clean;
  return clean.noised(schedule.alpha_bar(t));
}

double log_density(const MixtureModel& model, const NoiseSchedule& schedule, const Vector& z, int t,
                   const Condition& condition) {
  return noised_mixture(model, schedule, t, condition).log_density(z);
}

Vector epsilon_pred(const MixtureModel& model, const NoiseSchedule& schedule, const Vector& z, int t,
                    const Condition& condition) {
  if (t < 1 || t > schedule.steps()) throw std::out_of_range("epsilon_pred: timestep out of range");
  const double ab = schedule.alpha_bar(t);
  return -std::sqrt(1.0 - ab) * model.conditional(condition.label).noised(ab).score(z);
}

Vector cfg_epsilon(const MixtureModel& model, const NoiseSchedule& schedule, const Vector& z, int t,
                   const Condition& condition) {
  const double g = condition.guidance_scale;
  if (g < 0.0) throw std::invalid_argument("guidance scale must be non-negative");
  Vector eps = epsilon_pred(model, schedule, z, t, condition);
  if (g == 0.0) return eps;
  const Vector eps_uncond = epsilon_pred(model, schedule, z, t, Condition{std::string(kUnconditional), 0.0});
  return (1.0 + g) * eps - g * eps_uncond;
}

}  // namespace amdm
