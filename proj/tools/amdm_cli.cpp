// Command-line front end for the experiment harness.
//
//   amdm run --config configs/stats_table.json --out out/stats --workers 8
//   amdm validate-config --config configs/intersection.json
//   amdm list-experiments
//   amdm self-test
//
// Exit status: 0 when every built-in check passes, 1 when a check fails,
// 2 on usage, config or I/O errors.

#include "amdm/aggregate.hpp"
#include "amdm/harness/config.hpp"
#include "amdm/harness/experiments.hpp"
#include "amdm/rng.hpp"
#include "amdm/schedule.hpp"
#include "amdm/theory.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace amdm;
using namespace amdm::harness;

constexpr int kExitFail = 1;
constexpr int kExitError = 2;

void print_report(const ExperimentReport& report) {
  fmt::print("experiment {} ({})\n", report.id, kind_name(report.kind));
  for (const auto& [name, value] : report.metrics) fmt::print("  {:<40} {:.6g}\n", name, value);
  for (const auto& c : report.checks)
    fmt::print("  [{}] {} = {:.6g} {} {:.6g}\n", c.pass ? "PASS" : "FAIL", c.name, c.value,
               relation_symbol(c.relation), c.threshold);
  for (const auto& f : report.files) fmt::print("  wrote {}\n", f.string());
}

// Quick invariants that need no config; a smoke test for a fresh build.
int self_test() {
  struct Case {
    const char* name;
    std::function<bool()> fn;
  };
  const std::vector<Case> cases{
      {"schedule alpha_bar(0) = 1",
       [] { return NoiseSchedule::linear(1e-4, 0.02, 1000).alpha_bar(0) == 1.0; }},
      {"slerp keeps equal norms",
       [] {
         RngStream rng(1);
         for (int k = 0; k < 100; ++k) {
           Vector a = rng.normal_vector(64), b = rng.normal_vector(64);
           b *= a.norm() / b.norm();
           if (std::abs(slerp(a, b, 0.3).norm() / a.norm() - 1.0) > 1e-9) return false;
         }
         return true;
       }},
      {"deviation step is exact",
       [] {
         RngStream rng(2);
         const Vector z = rng.normal_vector(16), mu = rng.normal_vector(16);
         const Vector out = deviation_optimize(z, mu, 0.25);
         return std::abs((out - mu).norm() - ((z - mu).norm() - 0.25)) < 1e-12;
       }},
      {"membership bound at d = 0",
       [] { return membership_lower_bound(256, 0.1, 0.0, 1.0) == concentration_lower_bound(256, 0.1); }},
      {"shell fraction above bound",
       [] { return empirical_shell_fraction(1024, 1.0, 0.05, 2000, 3) >= concentration_lower_bound(1024, 0.05); }},
  };
  bool ok = true;
  for (const auto& c : cases) {
    bool pass = false;
    try {
      pass = c.fn();
    } catch (const std::exception& e) {
      fmt::print("  error: {}\n", e.what());
    }
    fmt::print("[{}] {}\n", pass ? "PASS" : "FAIL", c.name);
    ok = ok && pass;
  }
  return ok ? 0 : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aggregation of multiple diffusion models on analytic latent distributions"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::string format = "csv+svg";

  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("--config", config_path, "experiment config (JSON with comments)")->required()->check(
      CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory, overrides output_dir");
  run->add_option("--seed", seed, "base seed override");
  run->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "csv+svg"}));

  auto* validate_cmd = app.add_subcommand("validate-config", "parse and validate a config");
  validate_cmd->add_option("--config", config_path, "experiment config")->required()->check(CLI::ExistingFile);

  auto* list = app.add_subcommand("list-experiments", "list the experiment kinds");
  auto* self = app.add_subcommand("self-test", "run built-in invariant checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (auto kind : all_kinds()) fmt::print("{:<16} {}\n", kind_name(kind), kind_summary(kind));
      return 0;
    }
    if (*self) return self_test();
    if (*validate_cmd) {
      const auto cfg = load_config(config_path);
      fmt::print("ok: {} ({}, {} trials)\n", cfg.id, kind_name(cfg.kind), cfg.trials);
      return 0;
    }
    auto cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed) cfg.base_seed = *seed;
    cfg.write_svg = format == "csv+svg";
    const auto report = run_experiment(cfg, workers);
    print_report(report);
    return report.passed() ? 0 : kExitFail;
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
  }
  return kExitError;
}
