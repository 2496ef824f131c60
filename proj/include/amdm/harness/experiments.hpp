#pragma once

#include "amdm/harness/config.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace amdm::harness {

enum class Relation { kLess, kLessEqual, kGreater, kGreaterEqual, kEqual };

std::string_view relation_symbol(Relation r);

/// A built-in pass/fail check: `value relation threshold`.
struct Check {
  std::string name;
  double value = 0.0;
  Relation relation = Relation::kLess;
  double threshold = 0.0;
  bool pass = false;
};

Check make_check(std::string name, double value, Relation relation, double threshold);

struct ExperimentReport {
  std::string id;
  ExperimentKind kind = ExperimentKind::kAmdm;
  std::vector<Check> checks;
  std::vector<std::pair<std::string, double>> metrics;  // insertion order is output order
  std::vector<std::filesystem::path> files;

  bool passed() const;
  /// Throws std::out_of_range for unknown names.
  double metric(const std::string& name) const;
  const Check& check(const std::string& name) const;
};

/// Two-sided Student-t confidence interval for the mean.
struct Interval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};
Interval t_interval(const std::vector<double>& xs, double confidence);

/// Runs the experiment with trials seeded base_seed + trial index on at most
/// `workers` threads, writes summary.csv, metrics.csv and the kind-specific
/// tables (plus SVG plots when enabled) to config.output_dir, and returns the
/// report. Output bytes do not depend on `workers`.
ExperimentReport run_experiment(const ExperimentConfig& config, unsigned workers = 1);

}  // namespace amdm::harness
