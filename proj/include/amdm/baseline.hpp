#pragma once

#include "amdm/mixture.hpp"
#include "amdm/rng.hpp"
#include "amdm/sampler.hpp"
#include "amdm/schedule.hpp"
#include "amdm/types.hpp"

#include <cstdint>
#include <functional>
#include <span>

namespace amdm {

/// Sum of the noised conditional scores of every model at (z, t).
Vector product_score(std::span<const DiffusionModel> models, const NoiseSchedule& schedule, const Vector& z, int t,
                     std::span<const Condition> conditions);

using ScoreFn = std::function<Vector(const Vector&)>;

/// Unadjusted Langevin: z <- z + (step/2) score(z) + sqrt(step) xi, n_steps times.
Vector langevin_correct(Vector z, const ScoreFn& score, double step_size, int n_steps, RngStream& rng);

struct LangevinConfig {
  bool enabled = true;
  double step_scale = 0.1;  // Langevin step = step_scale * (1 - abar_t)
  int steps_per_level = 20;
  double sampler_eta = 1.0;
};

/// Reverse chain driven by the summed scores, with Langevin correction at
/// every visited level. The correction at t = 0 uses the noise level of the
/// smallest substep. The reverse chain draws from RngStream(seed, 0) and the
/// corrector from RngStream(seed, 1).
Trajectory composed_sample(std::span<const DiffusionModel> models, std::span<const Condition> conditions,
                           const NoiseSchedule& schedule, std::span<const int> substeps, const LangevinConfig& cfg,
                           std::uint64_t seed);

/// Exact normalized product of two isotropic Gaussian mixtures.
GaussianMixture product_of_mixtures(const GaussianMixture& a, const GaussianMixture& b);

}  // namespace amdm
