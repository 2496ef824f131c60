#pragma once

#include "amdm/mixture.hpp"
#include "amdm/sampler.hpp"
#include "amdm/schedule.hpp"
#include "amdm/types.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace amdm {

/// Great-circle interpolation between a and b. The angle is measured between
/// the normalized vectors; nearly parallel inputs fall back to linear
/// interpolation. w = 0 returns a and w = 1 returns b exactly.
///
/// Throws std::invalid_argument on zero-length inputs or w outside [0, 1] and
/// std::domain_error on (near-)antipodal inputs.
Vector slerp(const Vector& a, const Vector& b, double w);

/// Successive pairwise slerp: acc = v0; acc = slerp(acc, v[i+1], w[i]).
Vector slerp_many(std::span<const Vector> vectors, std::span<const double> weights);

/// Same fold with linear interpolation, i.e. a convex combination.
Vector lerp_many(std::span<const Vector> vectors, std::span<const double> weights);

/// Radial step of length eta from z_agg towards mu. Throws std::domain_error
/// when eta >= ||z_agg - mu|| (the step would reach or cross the mean).
Vector deviation_optimize(const Vector& z_agg, const Vector& mu, double eta);

enum class AggregationKind { kSpherical, kLinear };

/// What amdm_sample does when a deviation step would overshoot the mean.
enum class OvershootPolicy {
  kError,  // propagate std::domain_error
  kSkip,   // keep the aggregated latent for that model and count the event
};

struct AggregationConfig {
  int steps = 20;                     // number of aggregated reverse steps, s
  std::vector<double> weights{0.5};   // w_1..w_{N-1}
  std::vector<double> etas{0.3, 0.3};  // per-model deviation step
  int stage_offset = 0;  // index of the first aggregated step in the ladder
  AggregationKind kind = AggregationKind::kSpherical;
  OvershootPolicy overshoot = OvershootPolicy::kError;
};

struct AmdmResult {
  Trajectory trajectory;  // model 1; trajectory.stats holds one row per aggregated step plus the entry row
  std::size_t skipped_optimizations = 0;
};

/// Aggregation of multiple diffusion models.
///
/// Every model draws from RngStream(seed, i); model 1 therefore consumes
/// exactly the draws of sample(..., seed) and reproduces it when s = 0 or
/// when all weights and etas are zero. Outside the aggregation window only
/// model 1 advances. A window that starts after the first step seeds the
/// other models with model 1's current latent.
///
/// Throws std::invalid_argument when models disagree on the schedule or the
/// dimension, or when the config is inconsistent with N and the ladder.
AmdmResult amdm_sample(std::span<const DiffusionModel> models, std::span<const Condition> conditions,
                       const NoiseSchedule& schedule, std::span<const int> substeps, double eta_sampler,
                       const AggregationConfig& agg, std::uint64_t seed);

/// amdm_sample with linear aggregation regardless of agg.kind.
AmdmResult linear_amdm_sample(std::span<const DiffusionModel> models, std::span<const Condition> conditions,
                              const NoiseSchedule& schedule, std::span<const int> substeps, double eta_sampler,
                              const AggregationConfig& agg, std::uint64_t seed);

/// Geometry of one aggregation step between two latents.
struct PairGeometry {
  double phi = 0.0;    // angle between the latents, radians
  double delta = 0.0;  // ||z1 - z2||
  double phi_w = 1.0;  // chord ratio sin((1-w)phi/2) / sin(phi/2)
  double d = 0.0;      // phi_w * delta + eta, maximum distance to model 2's shell
};

/// Angle between nonzero vectors, in [0, pi].
double angle_between(const Vector& a, const Vector& b);

/// sin((1 - w) phi / 2) / sin(phi / 2); tends to 1 - w as phi -> 0.
double chord_ratio(double phi, double w);

PairGeometry theory_stats(const Vector& z1, const Vector& z2, double w, double eta);

}  // namespace amdm
