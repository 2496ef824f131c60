// Acceptance suite. `acceptance N` runs criterion N, `acceptance` runs all of
// them. Prints one [PASS]/[FAIL] line per criterion; exit status is nonzero
// when any selected criterion fails.

#include "amdm/aggregate.hpp"
#include "amdm/harness/config.hpp"
#include "amdm/harness/experiments.hpp"
#include "amdm/mixture.hpp"
#include "amdm/rng.hpp"
#include "amdm/sampler.hpp"
#include "amdm/schedule.hpp"
#include "amdm/theory.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

using namespace amdm;
using namespace amdm::harness;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

ExperimentReport run_shipped(const std::string& file, const std::string& tag) {
  auto cfg = load_config(fs::path(AMDM_CONFIG_DIR) / file);
  cfg.output_dir = (fs::temp_directory_path() / ("amdm_acceptance_" + tag)).string();
  fs::remove_all(cfg.output_dir);
  return run_experiment(cfg, workers());
}

Outcome shell_bound() {
  const auto start = Clock::now();
  double worst = INFINITY;
  for (int n : {256, 1024, 4096})
    for (double eps : {0.02, 0.05, 0.1}) {
      const double emp = empirical_shell_fraction(n, 1.0, eps, 10000, 101 + static_cast<std::uint64_t>(n));
      worst = std::min(worst, emp - concentration_lower_bound(n, eps));
    }
  const double secs = seconds_since(start);
  return {worst >= 0.0 && secs < 10.0, fmt::format("min(empirical - bound) = {:.3g}, runtime {:.2f} s", worst, secs)};
}

Outcome slerp_sphere() {
  RngStream rng(2024);
  double worst = 0.0;
  bool endpoints = true;
  for (int n : {2, 64, 256})
    for (int k = 0; k < 1000; ++k) {
      const Vector a = rng.normal_vector(n);
      Vector b = rng.normal_vector(n);
      b *= a.norm() / b.norm();
      for (double w : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const Vector out = slerp(a, b, w);
        worst = std::max(worst, std::abs(out.norm() - a.norm()) / a.norm());
        if (w == 0.0) endpoints = endpoints && out == a;
        if (w == 1.0) endpoints = endpoints && out == b;
      }
    }
  return {worst <= 1e-9 && endpoints,
          fmt::format("max relative norm error {:.3g}, endpoints exact: {}", worst, endpoints)};
}

Outcome deviation_exact() {
  RngStream rng(77);
  double radial = 0.0, direction = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int n = 2 + k % 255;
    const Vector z = rng.normal_vector(n) * 3.0, mu = rng.normal_vector(n);
    const double dist = (z - mu).norm();
    const double eta = 0.9 * dist * rng.uniform();
    const Vector out = deviation_optimize(z, mu, eta);
    radial = std::max(radial, std::abs((out - mu).norm() - (dist - eta)));
    direction = std::max(direction, ((out - mu).normalized() - (z - mu) / dist).cwiseAbs().maxCoeff());
  }
  return {radial <= 1e-12 && direction <= 1e-12,
          fmt::format("max radial error {:.3g}, max direction error {:.3g}", radial, direction)};
}

Outcome sampler_gaussian() {
  const auto s = NoiseSchedule::linear(1e-4, 0.02, 1000);
  const auto sub = uniform_substeps(s, 50);
  Vector mu(2);
  mu << 1.5, -0.5;
  const double var = 0.4;
  const MixtureModel model({{mu, var}}, {1.0}, {});
  const Condition cond{std::string(kUnconditional)};
  double mean_err = 0.0, cov_err = 0.0;
  for (double eta : {0.0, 1.0}) {
    const int count = 10000;
    std::vector<Vector> xs;
    xs.reserve(count);
    for (int k = 0; k < count; ++k) xs.push_back(sample(model, s, cond, sub, eta, 90000 + k).final_state().z);
    Vector mean = Vector::Zero(2);
    for (const auto& x : xs) mean += x;
    mean /= count;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& x : xs) cov += (x - mean) * (x - mean).transpose();
    cov /= count - 1.0;
    mean_err = std::max(mean_err, (mean - mu).norm() / mu.norm());
    cov_err = std::max(cov_err, (cov - var * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() / var);
  }
  const auto a = sample(model, s, cond, sub, 0.0, 31337);
  const auto b = sample(model, s, cond, sub, 0.0, 31337);
  bool same = a.states.size() == b.states.size();
  for (std::size_t i = 0; same && i < a.states.size(); ++i)
    same = std::memcmp(a.states[i].z.data(), b.states[i].z.data(), sizeof(double) * 2) == 0;
  return {mean_err < 0.03 && cov_err < 0.05 && same,
          fmt::format("mean rel err {:.4f}, cov rel err {:.4f}, DDIM byte-identical: {}", mean_err, cov_err, same)};
}

Outcome moments() {
  const auto s = NoiseSchedule::linear(1e-4, 0.02, 1000);
  Vector m0(1), p0(1);
  m0 << 1.0;
  p0 << 0.0;
  double ode = 0.0, tail_m = 0.0, tail_p = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const double t = i / 1000.0;
    const auto c = moment_closed_form(m0, p0, t, s);
    const auto r = moment_ode_integrate(m0, p0, t, 1e-3, s);
    ode = std::max({ode, std::abs(c.m[0] - r.m[0]), std::abs(c.P[0] - r.P[0])});
    if (t > 0.6) {
      tail_m = std::max(tail_m, std::abs(c.m[0]));
      tail_p = std::max(tail_p, std::abs(1.0 - c.P[0]));
    }
  }
  return {ode < 1e-6 && tail_m < 0.05 && tail_p < 0.05,
          fmt::format("ODE max error {:.3g}; for t > 0.6 max |m| = {:.4f}, max |1 - P| = {:.4f}", ode, tail_m, tail_p)};
}

Outcome stats_pattern() {
  const auto start = Clock::now();
  const auto cfg = load_config(fs::path(AMDM_CONFIG_DIR) / "stats_table.json");
  const auto r = run_shipped("stats_table.json", "stats");
  const double secs = seconds_since(start);
  const bool shape = cfg.models.size() == 2 && cfg.models[0].mixture.dim() == 256 && cfg.sampler.substeps == 50 &&
                     cfg.aggregation.steps == 20 && cfg.aggregation.weights == std::vector<double>{0.5} &&
                     cfg.aggregation.etas == std::vector<double>{0.3, 0.3};
  const double start_err = r.metric("max_abs_phi_T_minus_half_pi");
  const double phi = r.metric("max_phi_after_first");
  const double gap = r.metric("max_relative_norm_gap_after_first");
  return {shape && start_err <= 0.15 && phi < 0.2 && gap < 0.05 && secs < 60.0,
          fmt::format("|phi_T - pi/2| <= {:.4f}, max phi after first {:.4f}, max norm gap {:.4f}, runtime {:.1f} s",
                      start_err, phi, gap, secs)};
}

Outcome linear_ablation() {
  const auto cfg = load_config(fs::path(AMDM_CONFIG_DIR) / "ablation_linear.json");
  const auto r = run_shipped("ablation_linear.json", "linear");
  const bool shape = cfg.trials >= 100 && cfg.models[0].mixture.dim() == 256;
  const double l5 = r.metric("linear_shell_dev_s5"), l10 = r.metric("linear_shell_dev_s10"),
               l20 = r.metric("linear_shell_dev_s20");
  const double p20 = r.metric("spherical_shell_dev_s20");
  return {shape && l5 < l10 && l10 < l20 && l20 >= 2.0 * p20,
          fmt::format("linear {:.4f} < {:.4f} < {:.4f}; ratio at s=20 {:.2f}", l5, l10, l20, l20 / p20)};
}

Outcome intersection() {
  const auto cfg = load_config(fs::path(AMDM_CONFIG_DIR) / "intersection.json");
  const auto gain_run = run_shipped("intersection.json", "intersection");
  const auto stage = run_shipped("ablation_stage.json", "stage");
  const auto stage_cfg = load_config(fs::path(AMDM_CONFIG_DIR) / "ablation_stage.json");
  const auto& offsets = stage_cfg.stage.offsets;
  const int first = *std::min_element(offsets.begin(), offsets.end());
  const int last = *std::max_element(offsets.begin(), offsets.end());
  const double initial = stage.metric(fmt::format("joint_rate_offset_{}", first));
  const double final_window = stage.metric(fmt::format("joint_rate_offset_{}", last));
  const double gain = gain_run.metric("gain");
  const bool shape = cfg.trials >= 1000 && stage_cfg.trials >= 1000 && cfg.membership.quantile == 0.05 &&
                     last + cfg.aggregation.steps == cfg.sampler.substeps;
  return {shape && gain >= 0.10 && initial > final_window,
          fmt::format("gain {:.3f} (AMDM {:.3f} vs solo {:.3f}); initial window {:.3f} vs final window {:.3f}", gain,
                      gain_run.metric("amdm_joint_rate"), gain_run.metric("solo_joint_rate"), initial, final_window)};
}

Outcome composition() {
  const auto cfg = load_config(fs::path(AMDM_CONFIG_DIR) / "composition_2d.json");
  const auto r = run_shipped("composition_2d.json", "composition");
  const bool shape = cfg.trials >= 10 && cfg.composition.confidence == 0.90;
  const double mmd_gap = r.metric("amdm_ln_mmd_lo") - r.metric("baseline_ln_mmd_hi");
  const double ll_gap = r.metric("baseline_ll_lo") - r.metric("amdm_ll_hi");
  return {shape && mmd_gap > 0.0 && ll_gap > 0.0,
          fmt::format("ln MMD baseline [{:.3f}, {:.3f}] vs AMDM [{:.3f}, {:.3f}]; LL baseline [{:.3f}, {:.3f}] vs AMDM "
                      "[{:.3f}, {:.3f}]",
                      r.metric("baseline_ln_mmd_lo"), r.metric("baseline_ln_mmd_hi"), r.metric("amdm_ln_mmd_lo"),
                      r.metric("amdm_ln_mmd_hi"), r.metric("baseline_ll_lo"), r.metric("baseline_ll_hi"),
                      r.metric("amdm_ll_lo"), r.metric("amdm_ll_hi"))};
}

Outcome membership_bound() {
  bool exact = true, monotone = true, vacuous = true;
  for (int n : {16, 256, 4096})
    for (double eps : {0.05, 0.1, 0.2})
      for (double sigma : {0.1, 0.5, 1.0}) {
        exact = exact && membership_lower_bound(n, eps, 0.0, sigma) == concentration_lower_bound(n, eps);
        double prev = membership_lower_bound(n, eps, 0.0, sigma);
        for (int k = 1; k <= 200; ++k) {
          const double d = k * 0.01 * eps * sigma * std::sqrt(static_cast<double>(n));
          const double cur = membership_lower_bound(n, eps, d, sigma);
          monotone = monotone && cur <= prev;
          prev = cur;
        }
        vacuous = vacuous && membership_lower_bound(n, eps, 1.5 * eps * sigma * std::sqrt(static_cast<double>(n)), sigma) == 0.0 &&
                  membership_lower_bound(n, eps, 3.0 * eps * sigma * std::sqrt(static_cast<double>(n)), sigma) == 0.0;
      }
  return {exact && monotone && vacuous,
          fmt::format("d=0 exact: {}, non-increasing in d: {}, vacuous regime gives 0: {}", exact, monotone, vacuous)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> fn;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "concentration bound holds empirically", shell_bound},
      {2, "slerp stays on the sphere", slerp_sphere},
      {3, "deviation step is exact", deviation_exact},
      {4, "sampler matches a Gaussian target", sampler_gaussian},
      {5, "moment ODE and convergence after t = 0.6", moments},
      {6, "angle and norm pattern of aggregated latents", stats_pattern},
      {7, "linear aggregation leaves the shell", linear_ablation},
      {8, "intersection gain and window direction", intersection},
      {9, "composition ordering vs score-sum baseline", composition},
      {10, "membership bound sanity", membership_bound},
  };
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);
  if (only < 0 || only > 10) {
    fmt::print(stderr, "usage: acceptance [1-10]\n");
    return 2;
  }
  bool ok = true;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, fmt::format("error: {}", e.what())};
    }
    fmt::print("[{}] criterion {}: {} ({})\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail);
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
