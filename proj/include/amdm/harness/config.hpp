#pragma once

#include "amdm/aggregate.hpp"
#include "amdm/baseline.hpp"
#include "amdm/mixture.hpp"
#include "amdm/schedule.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace amdm::harness {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind {
  kAmdm,
  kAblationLinear,
  kAblationStage,
  kAblationEta,
  kTheoryChecks,
  kComposition2d,
  kStatsTable,
};

std::string_view kind_name(ExperimentKind kind);
std::optional<ExperimentKind> parse_kind(std::string_view name);
const std::vector<ExperimentKind>& all_kinds();
/// One-line description shown by `list-experiments`.
std::string_view kind_summary(ExperimentKind kind);

struct ScheduleParams {
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int steps = 1000;
};

struct ModelSpec {
  std::string name;
  MixtureModel mixture;
  Condition condition;
};

struct SamplerParams {
  int substeps = 50;
  double eta = 0.0;
};

/// Domain-membership settings shared by the intersection experiments.
struct MembershipParams {
  double quantile = 0.05;
  int calibration_draws = 20000;
  double min_gain = 0.10;  // required joint-rate gain of AMDM over model 1 alone
};

struct LinearAblationParams {
  std::vector<int> steps{5, 10, 20};
  double min_ratio = 2.0;  // linear over spherical shell deviation at the largest s
};

struct StageAblationParams {
  std::vector<int> offsets{0, 30};
};

struct EtaAblationParams {
  std::vector<double> etas{0.0, 0.1, 0.3, 0.6, 1.0};
};

struct TheoryParams {
  std::vector<int> dims{256, 1024, 4096};
  std::vector<double> epsilons{0.02, 0.05, 0.1};
  int draws = 10000;
  double sigma = 1.0;
  // Membership bound sweep.
  int bound_dim = 256;
  double eps_domain = 0.1;
  double sigma_t = 1.0;
  std::vector<double> distances{0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0};
  // Moment ODE.
  double m0 = 1.0;
  double p0 = 0.0;
  double ode_step = 1e-3;
  double ode_tolerance = 1e-6;
  double converge_after = 0.6;
  double converge_tolerance = 0.05;
  int moment_grid = 101;
};

struct StatsTableParams {
  double phi_start_tolerance = 0.15;  // |phi(T) - pi/2|
  double phi_max = 0.2;               // phi at every aggregated step after the first
  double norm_gap_max = 0.05;         // | ||z1|| - ||z2|| | / ||z1||
};

struct CompositionParams {
  int samples = 500;          // finals per seed and per method
  int reference_samples = 500;
  double mmd_floor = 1e-8;    // lower clamp for MMD^2 before taking logs
  double confidence = 0.90;
  LangevinConfig langevin;
};

struct ExperimentConfig {
  std::string id;
  ExperimentKind kind = ExperimentKind::kAmdm;
  ScheduleParams schedule;
  std::vector<ModelSpec> models;
  SamplerParams sampler;
  AggregationConfig aggregation;
  int trials = 1;
  std::uint64_t base_seed = 0;
  std::filesystem::path output_dir = "out";
  bool write_svg = true;

  MembershipParams membership;
  LinearAblationParams linear;
  StageAblationParams stage;
  EtaAblationParams eta;
  TheoryParams theory;
  StatsTableParams stats;
  CompositionParams composition;

  NoiseSchedule make_schedule() const;
  std::vector<DiffusionModel> make_models() const;
  std::vector<Condition> conditions() const;
};

/// Parses JSON text (comments allowed) and validates it. `source` names the
/// input in error messages.
ExperimentConfig parse_config(std::string_view text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError on the first violated invariant.
void validate(const ExperimentConfig& config);

}  // namespace amdm::harness
