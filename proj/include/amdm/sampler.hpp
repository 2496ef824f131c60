#pragma once

#include "amdm/mixture.hpp"
#include "amdm/rng.hpp"
#include "amdm/schedule.hpp"
#include "amdm/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace amdm {

struct LatentState {
  Vector z;
  int t = 0;
};

/// Per-step aggregation diagnostics, one row per recorded timestep.
///
/// Angles and norms describe the per-model latents before aggregation. The
/// first row (t = T) holds the independent initial draws. `shell_dev` is the
/// relative shell deviation of the aggregated latent at that step (model 1's
/// latent on the initial row).
struct StepStats {
  int t = 0;
  double phi = 0.0;
  std::vector<double> norm_per_model;
  double norm_diff = 0.0;
  double diff_norm = 0.0;
  double d = 0.0;
  double shell_dev = 0.0;
};

struct Trajectory {
  std::vector<LatentState> states;  // t strictly decreasing, ends at t = 0
  std::vector<StepStats> stats;
  std::uint64_t seed = 0;

  const LatentState& final_state() const { return states.back(); }
};

/// A conditional denoiser bound to the forward process it was trained on.
struct DiffusionModel {
  MixtureModel mixture;
  NoiseSchedule schedule;
};

/// Mean of the reverse kernel t -> t_prev for a given noise prediction:
/// sqrt(abar_prev / abar_t) z + (sqrt(1 - abar_prev - sigma^2) - sqrt(abar_prev (1 - abar_t) / abar_t)) eps.
Vector reverse_mean(const NoiseSchedule& schedule, const Vector& epsilon, const Vector& z, int t, int t_prev,
                    double sigma);

/// Mean and standard deviation of one guided reverse step.
struct ReverseKernel {
  Vector mean;
  double sigma = 0.0;
};

ReverseKernel reverse_kernel(const NoiseSchedule& schedule, const MixtureModel& model, const LatentState& state,
                             int t_prev, const Condition& condition, double eta);

/// Draws z_{t_prev} from the guided reverse kernel. Noise is only drawn when
/// sigma > 0, so eta = 0 steps never touch the stream.
LatentState reverse_step(const NoiseSchedule& schedule, const MixtureModel& model, const LatentState& state,
                         int t_prev, const Condition& condition, double eta, RngStream& rng);

/// Single-model ancestral sampling down the substep ladder. z_T ~ N(0, I) is
/// drawn from RngStream(seed, 0).
Trajectory sample(const MixtureModel& model, const NoiseSchedule& schedule, const Condition& condition,
                  std::span<const int> substeps, double eta, std::uint64_t seed);

}  // namespace amdm
