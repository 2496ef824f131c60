#include "amdm/harness/experiments.hpp"

#include "amdm/aggregate.hpp"
#include "amdm/baseline.hpp"
#include "amdm/harness/csv.hpp"
#include "amdm/harness/svg.hpp"
#include "amdm/harness/worker_pool.hpp"
#include "amdm/metrics.hpp"
#include "amdm/rng.hpp"
#include "amdm/sampler.hpp"
#include "amdm/theory.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace amdm::harness {

namespace {

namespace fs = std::filesystem;

struct Context {
  const ExperimentConfig& cfg;
  unsigned workers;
  NoiseSchedule schedule;
  std::vector<DiffusionModel> models;
  std::vector<Condition> conditions;
  std::vector<int> substeps;
  ExperimentReport& report;

  std::uint64_t trial_seed(std::size_t i) const { return cfg.base_seed + i; }

  void metric(std::string name, double value) { report.metrics.emplace_back(std::move(name), value); }
  void check(std::string name, double value, Relation rel, double threshold) {
    report.checks.push_back(make_check(std::move(name), value, rel, threshold));
  }

  void write(const CsvTable& table, const std::string& file) {
    const fs::path path = cfg.output_dir / file;
    table.write(path);
    report.files.push_back(path);
  }

  void plot(const std::vector<Series>& series, const PlotLabels& labels, const std::string& file) {
    if (!cfg.write_svg) return;
    const fs::path path = cfg.output_dir / file;
    render_line_plot(series, labels, path);
    report.files.push_back(path);
  }
};

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Joint generation-domain tests at t = 0, one per model and condition. Each
// model calibrates from its own seed so the draws are independent.
std::vector<DomainTest> final_domains(const Context& ctx) {
  std::vector<DomainTest> out;
  for (std::size_t j = 0; j < ctx.models.size(); ++j)
    out.emplace_back(ctx.models[j].mixture, ctx.schedule, 0, ctx.conditions[j], ctx.cfg.membership.quantile,
                     ctx.cfg.membership.calibration_draws, ctx.cfg.base_seed + j);
  return out;
}

bool inside_all(const Vector& z, const std::vector<DomainTest>& domains) {
  return std::all_of(domains.begin(), domains.end(), [&](const DomainTest& d) { return d.contains(z); });
}

struct MembershipRun {
  double rate = 0.0;
  std::size_t skipped = 0;
  std::vector<bool> inside;
};

MembershipRun amdm_membership(const Context& ctx, const AggregationConfig& agg,
                              const std::vector<DomainTest>& domains) {
  struct Out {
    bool inside;
    std::size_t skipped;
  };
  const auto results = parallel_map<Out>(ctx.cfg.trials, ctx.workers, [&](std::size_t i) {
    const auto r = amdm_sample(ctx.models, ctx.conditions, ctx.schedule, ctx.substeps, ctx.cfg.sampler.eta, agg,
                               ctx.trial_seed(i));
    return Out{inside_all(r.trajectory.final_state().z, domains), r.skipped_optimizations};
  });
  MembershipRun run;
  for (const auto& r : results) {
    run.inside.push_back(r.inside);
    run.skipped += r.skipped;
  }
  run.rate = static_cast<double>(std::count(run.inside.begin(), run.inside.end(), true)) /
             static_cast<double>(run.inside.size());
  return run;
}

MembershipRun solo_membership(const Context& ctx, const std::vector<DomainTest>& domains) {
  const auto results = parallel_map<char>(ctx.cfg.trials, ctx.workers, [&](std::size_t i) -> char {
    const auto t = sample(ctx.models[0].mixture, ctx.schedule, ctx.conditions[0], ctx.substeps, ctx.cfg.sampler.eta,
                          ctx.trial_seed(i));
    return inside_all(t.final_state().z, domains) ? 1 : 0;
  });
  MembershipRun run;
  for (char c : results) run.inside.push_back(c != 0);
  run.rate = static_cast<double>(std::count(run.inside.begin(), run.inside.end(), true)) /
             static_cast<double>(run.inside.size());
  return run;
}

CsvTable trajectory_table(const Trajectory& traj) {
  std::vector<std::string> header{"t"};
  const auto dim = traj.states.front().z.size();
  for (Eigen::Index k = 0; k < dim; ++k) header.push_back(fmt::format("z{}", k));
  CsvTable table(std::move(header));
  for (const auto& s : traj.states) {
    std::vector<Cell> row{static_cast<long long>(s.t)};
    for (Eigen::Index k = 0; k < dim; ++k) row.emplace_back(s.z[k]);
    table.add_row(std::move(row));
  }
  return table;
}

Series norm_series(std::string name, const Trajectory& traj) {
  Series s{std::move(name), {}};
  for (const auto& st : traj.states) s.points.emplace_back(st.t, st.z.norm());
  return s;
}

// ---------------------------------------------------------------------------

void run_amdm(Context& ctx) {
  const auto domains = final_domains(ctx);
  const auto solo = solo_membership(ctx, domains);
  const auto agg = amdm_membership(ctx, ctx.cfg.aggregation, domains);

  CsvTable trials({"trial", "seed", "solo_joint", "amdm_joint"});
  for (std::size_t i = 0; i < solo.inside.size(); ++i)
    trials.add_row({static_cast<long long>(i), static_cast<long long>(ctx.trial_seed(i)), static_cast<bool>(solo.inside[i]),
                    static_cast<bool>(agg.inside[i])});
  ctx.write(trials, "trials.csv");

  const auto first = amdm_sample(ctx.models, ctx.conditions, ctx.schedule, ctx.substeps, ctx.cfg.sampler.eta,
                                 ctx.cfg.aggregation, ctx.trial_seed(0));
  const auto first_solo = sample(ctx.models[0].mixture, ctx.schedule, ctx.conditions[0], ctx.substeps,
                                 ctx.cfg.sampler.eta, ctx.trial_seed(0));
  ctx.write(trajectory_table(first.trajectory), "trajectory.csv");
  ctx.plot({norm_series("AMDM", first.trajectory), norm_series("model 1 alone", first_solo)},
           {"Latent norm, first trial", "t", "||z_t||"}, "norm.svg");

  ctx.metric("solo_joint_rate", solo.rate);
  ctx.metric("amdm_joint_rate", agg.rate);
  ctx.metric("gain", agg.rate - solo.rate);
  ctx.metric("skipped_optimizations", static_cast<double>(agg.skipped));
  ctx.check("joint_rate_gain", agg.rate - solo.rate, Relation::kGreaterEqual, ctx.cfg.membership.min_gain);
}

void run_ablation_stage(Context& ctx) {
  const auto domains = final_domains(ctx);
  const auto solo = solo_membership(ctx, domains);
  const auto ladder = reverse_ladder(ctx.substeps);

  CsvTable table({"stage_offset", "window_start_t", "window_end_t", "joint_rate", "skipped_optimizations"});
  Series curve{"AMDM", {}};
  Series flat{"model 1 alone", {}};
  std::vector<double> rates;
  for (int offset : ctx.cfg.stage.offsets) {
    AggregationConfig agg = ctx.cfg.aggregation;
    agg.stage_offset = offset;
    const auto run = amdm_membership(ctx, agg, domains);
    rates.push_back(run.rate);
    table.add_row({static_cast<long long>(offset), static_cast<long long>(ladder[static_cast<std::size_t>(offset)]),
                   static_cast<long long>(ladder[static_cast<std::size_t>(offset + agg.steps)]), run.rate,
                   static_cast<long long>(run.skipped)});
    curve.points.emplace_back(offset, run.rate);
    flat.points.emplace_back(offset, solo.rate);
    ctx.metric(fmt::format("joint_rate_offset_{}", offset), run.rate);
    ctx.metric(fmt::format("skipped_offset_{}", offset), static_cast<double>(run.skipped));
  }
  ctx.write(table, "stage.csv");
  ctx.plot({curve, flat}, {"Aggregation stage ablation", "window start (substep index)", "joint membership rate"},
           "stage.svg");
  ctx.metric("solo_joint_rate", solo.rate);
  ctx.check("initial_minus_final_rate", rates.front() - rates.back(), Relation::kGreater, 0.0);
}

void run_ablation_eta(Context& ctx) {
  const auto domains = final_domains(ctx);
  const auto solo = solo_membership(ctx, domains);

  CsvTable table({"eta", "joint_rate", "mean_d", "skipped_optimizations"});
  Series curve{"AMDM", {}};
  Series flat{"model 1 alone", {}};
  double min_gain = std::numeric_limits<double>::infinity();
  for (double eta : ctx.cfg.eta.etas) {
    AggregationConfig agg = ctx.cfg.aggregation;
    agg.etas.assign(ctx.models.size(), eta);
    struct Out {
      bool inside;
      double d;
      std::size_t skipped;
    };
    const auto results = parallel_map<Out>(ctx.cfg.trials, ctx.workers, [&](std::size_t i) {
      const auto r =
          amdm_sample(ctx.models, ctx.conditions, ctx.schedule, ctx.substeps, ctx.cfg.sampler.eta, agg,
                      ctx.trial_seed(i));
      double d = 0.0;
      const auto& stats = r.trajectory.stats;
      for (std::size_t k = 1; k < stats.size(); ++k) d += stats[k].d;
      if (stats.size() > 1) d /= static_cast<double>(stats.size() - 1);
      return Out{inside_all(r.trajectory.final_state().z, domains), d, r.skipped_optimizations};
    });
    std::size_t inside = 0, skipped = 0;
    double d = 0.0;
    for (const auto& r : results) {
      inside += r.inside ? 1 : 0;
      skipped += r.skipped;
      d += r.d;
    }
    const double rate = static_cast<double>(inside) / static_cast<double>(results.size());
    d /= static_cast<double>(results.size());
    table.add_row({eta, rate, d, static_cast<long long>(skipped)});
    curve.points.emplace_back(eta, rate);
    flat.points.emplace_back(eta, solo.rate);
    ctx.metric(fmt::format("joint_rate_eta_{}", format_double(eta)), rate);
    min_gain = std::min(min_gain, rate - solo.rate);
  }
  ctx.write(table, "eta.csv");
  ctx.plot({curve, flat}, {"Deviation step ablation", "eta", "joint membership rate"}, "eta.svg");
  ctx.metric("solo_joint_rate", solo.rate);
  ctx.check("min_gain_over_solo", min_gain, Relation::kGreater, 0.0);
}

void run_ablation_linear(Context& ctx) {
  auto mean_window_dev = [&](AggregationKind kind, int steps) {
    AggregationConfig agg = ctx.cfg.aggregation;
    agg.kind = kind;
    agg.steps = steps;
    const auto devs = parallel_map<double>(ctx.cfg.trials, ctx.workers, [&](std::size_t i) {
      const auto r = amdm_sample(ctx.models, ctx.conditions, ctx.schedule, ctx.substeps, ctx.cfg.sampler.eta, agg,
                                 ctx.trial_seed(i));
      // Skip the entry row: it holds model 1's latent, not an aggregate.
      const auto& stats = r.trajectory.stats;
      double sum = 0.0;
      for (std::size_t k = 1; k < stats.size(); ++k) sum += stats[k].shell_dev;
      return sum / static_cast<double>(stats.size() - 1);
    });
    return mean_of(devs);
  };

  CsvTable table({"s", "linear_shell_dev", "spherical_shell_dev", "ratio"});
  Series lin{"linear", {}};
  Series sph{"spherical", {}};
  std::vector<double> linear_devs;
  double last_ratio = 0.0;
  for (int s : ctx.cfg.linear.steps) {
    const double l = mean_window_dev(AggregationKind::kLinear, s);
    const double p = mean_window_dev(AggregationKind::kSpherical, s);
    last_ratio = l / p;
    linear_devs.push_back(l);
    table.add_row({static_cast<long long>(s), l, p, last_ratio});
    lin.points.emplace_back(s, l);
    sph.points.emplace_back(s, p);
    ctx.metric(fmt::format("linear_shell_dev_s{}", s), l);
    ctx.metric(fmt::format("spherical_shell_dev_s{}", s), p);
  }
  ctx.write(table, "ablation_linear.csv");
  ctx.plot({lin, sph}, {"Shell deviation inside the aggregation window", "s", "mean shell deviation"},
           "ablation_linear.svg");

  double min_increase = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < linear_devs.size(); ++k)
    min_increase = std::min(min_increase, linear_devs[k] - linear_devs[k - 1]);
  if (linear_devs.size() > 1) ctx.check("linear_min_increase", min_increase, Relation::kGreater, 0.0);
  ctx.check("linear_over_spherical_at_max_s", last_ratio, Relation::kGreaterEqual, ctx.cfg.linear.min_ratio);
}

void run_stats_table(Context& ctx) {
  const auto& st = ctx.cfg.stats;
  const auto results = parallel_map<AmdmResult>(ctx.cfg.trials, ctx.workers, [&](std::size_t i) {
    return amdm_sample(ctx.models, ctx.conditions, ctx.schedule, ctx.substeps, ctx.cfg.sampler.eta,
                       ctx.cfg.aggregation, ctx.trial_seed(i));
  });

  const auto& rows = results.front().trajectory.stats;
  CsvTable table({"t", "phi", "norm1", "norm2", "norm_diff", "diff_norm", "d", "shell_dev"});
  Series phi{"phi", {}};
  for (const auto& r : rows) {
    table.add_row({static_cast<long long>(r.t), r.phi, r.norm_per_model[0], r.norm_per_model[1], r.norm_diff,
                   r.diff_norm, r.d, r.shell_dev});
    phi.points.emplace_back(r.t, r.phi);
  }
  ctx.write(table, "stats.csv");
  ctx.plot({phi}, {"Angle between model latents", "t", "phi (rad)"}, "phi.svg");

  // Row 0 is the entry at t = T, row 1 the first aggregated step.
  double start_err = 0.0, phi_max = 0.0, gap_max = 0.0;
  for (const auto& res : results) {
    const auto& s = res.trajectory.stats;
    start_err = std::max(start_err, std::abs(s.front().phi - std::numbers::pi / 2));
    for (std::size_t k = 2; k < s.size(); ++k) {
      phi_max = std::max(phi_max, s[k].phi);
      gap_max = std::max(gap_max, s[k].norm_diff / s[k].norm_per_model[0]);
    }
  }
  ctx.metric("phi_T", rows.front().phi);
  ctx.metric("max_abs_phi_T_minus_half_pi", start_err);
  ctx.metric("max_phi_after_first", phi_max);
  ctx.metric("max_relative_norm_gap_after_first", gap_max);
  ctx.check("phi_T_near_half_pi", start_err, Relation::kLessEqual, st.phi_start_tolerance);
  if (rows.size() > 2) {
    ctx.check("phi_after_first_step", phi_max, Relation::kLess, st.phi_max);
    ctx.check("relative_norm_gap", gap_max, Relation::kLess, st.norm_gap_max);
  }
}

void run_theory(Context& ctx) {
  const auto& th = ctx.cfg.theory;

  CsvTable shell({"n", "epsilon", "bound", "empirical", "pass"});
  double min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < th.dims.size(); ++k) {
    const int n = th.dims[k];
    const auto emp = empirical_shell_fractions(n, th.sigma, th.epsilons, th.draws, ctx.cfg.base_seed + k);
    for (std::size_t e = 0; e < th.epsilons.size(); ++e) {
      const double bound = concentration_lower_bound(n, th.epsilons[e]);
      shell.add_row({static_cast<long long>(n), th.epsilons[e], bound, emp[e], emp[e] >= bound});
      min_margin = std::min(min_margin, emp[e] - bound);
    }
  }
  ctx.write(shell, "shell_bound.csv");
  ctx.metric("min_empirical_minus_bound", min_margin);
  ctx.check("empirical_at_least_bound", min_margin, Relation::kGreaterEqual, 0.0);

  CsvTable mb({"d", "bound"});
  Series bound_curve{"membership bound", {}};
  double max_rise = -std::numeric_limits<double>::infinity();
  double prev = 0.0;
  std::vector<double> ds = th.distances;
  std::sort(ds.begin(), ds.end());
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const double b = membership_lower_bound(th.bound_dim, th.eps_domain, ds[k], th.sigma_t);
    mb.add_row({ds[k], b});
    bound_curve.points.emplace_back(ds[k], b);
    if (k > 0) max_rise = std::max(max_rise, b - prev);
    prev = b;
  }
  ctx.write(mb, "membership_bound.csv");
  ctx.plot({bound_curve}, {"Membership lower bound", "d", "bound"}, "membership_bound.svg");
  const double at_zero = membership_lower_bound(th.bound_dim, th.eps_domain, 0.0, th.sigma_t);
  ctx.check("bound_at_d0_matches_concentration",
            std::abs(at_zero - concentration_lower_bound(th.bound_dim, th.eps_domain)), Relation::kEqual, 0.0);
  if (ds.size() > 1) ctx.check("bound_max_rise_in_d", max_rise, Relation::kLessEqual, 0.0);
  const double vacuous_d = 2.0 * th.eps_domain * th.sigma_t * std::sqrt(static_cast<double>(th.bound_dim));
  ctx.check("bound_vacuous_regime",
            membership_lower_bound(th.bound_dim, th.eps_domain, vacuous_d, th.sigma_t), Relation::kEqual, 0.0);

  const Vector m0 = Vector::Constant(1, th.m0);
  const Vector p0 = Vector::Constant(1, th.p0);
  CsvTable moments({"t", "m_closed", "P_closed", "m_rk4", "P_rk4"});
  Series mean_curve{"m(t)", {}};
  Series var_curve{"P(t)", {}};
  double ode_err = 0.0, tail_m = 0.0, tail_p = 0.0;
  for (int k = 0; k < th.moment_grid; ++k) {
    const double t = static_cast<double>(k) / (th.moment_grid - 1);
    const auto cf = moment_closed_form(m0, p0, t, ctx.schedule);
    const auto rk = moment_ode_integrate(m0, p0, t, th.ode_step, ctx.schedule);
    moments.add_row({t, cf.m[0], cf.P[0], rk.m[0], rk.P[0]});
    mean_curve.points.emplace_back(t, cf.m[0]);
    var_curve.points.emplace_back(t, cf.P[0]);
    ode_err = std::max({ode_err, std::abs(cf.m[0] - rk.m[0]), std::abs(cf.P[0] - rk.P[0])});
    if (t > th.converge_after) {
      tail_m = std::max(tail_m, std::abs(cf.m[0]));
      tail_p = std::max(tail_p, std::abs(1.0 - cf.P[0]));
    }
  }
  ctx.write(moments, "moments.csv");
  ctx.plot({mean_curve, var_curve}, {"Moments of p(z_t) over time", "t", "value"}, "moments.svg");
  ctx.metric("moment_ode_max_error", ode_err);
  ctx.metric("max_abs_mean_after_threshold", tail_m);
  ctx.metric("max_abs_one_minus_var_after_threshold", tail_p);
  ctx.check("moment_ode_vs_closed_form", ode_err, Relation::kLess, th.ode_tolerance);
  ctx.check("mean_converged_after_threshold", tail_m, Relation::kLess, th.converge_tolerance);
  ctx.check("variance_converged_after_threshold", tail_p, Relation::kLess, th.converge_tolerance);
}

void run_composition(Context& ctx) {
  const auto& cp = ctx.cfg.composition;
  if (ctx.models.size() != 2) throw ConfigError("composition-2d needs exactly two models");
  const auto target = product_of_mixtures(noised_mixture(ctx.models[0].mixture, ctx.schedule, 0, ctx.conditions[0]),
                                          noised_mixture(ctx.models[1].mixture, ctx.schedule, 0, ctx.conditions[1]));
  const auto log_target = [&](const Vector& z) { return target.log_density(z); };

  struct SeedResult {
    double bandwidth, mmd2_amdm, mmd2_base, ll_amdm, ll_base, ll_ref, var_amdm, var_base, var_ref;
    std::size_t skipped;
  };
  const auto results = parallel_map<SeedResult>(ctx.cfg.trials, ctx.workers, [&](std::size_t i) {
    const std::uint64_t seed = ctx.trial_seed(i);
    VectorList amdm_finals, base_finals, reference;
    std::size_t skipped = 0;
    for (int k = 0; k < cp.samples; ++k) {
      const std::uint64_t s = splitmix64(splitmix64(seed) + static_cast<std::uint64_t>(k));
      const auto r = amdm_sample(ctx.models, ctx.conditions, ctx.schedule, ctx.substeps, ctx.cfg.sampler.eta,
                                 ctx.cfg.aggregation, s);
      skipped += r.skipped_optimizations;
      amdm_finals.push_back(r.trajectory.final_state().z);
      base_finals.push_back(
          composed_sample(ctx.models, ctx.conditions, ctx.schedule, ctx.substeps, cp.langevin, s).final_state().z);
    }
    RngStream ref_rng(seed, 0x7265);
    for (int k = 0; k < cp.reference_samples; ++k) reference.push_back(target.sample(ref_rng));
    const double h = median_bandwidth(reference, reference);
    return SeedResult{h,
                      mmd_rbf(amdm_finals, reference, h),
                      mmd_rbf(base_finals, reference, h),
                      avg_log_likelihood(amdm_finals, log_target),
                      avg_log_likelihood(base_finals, log_target),
                      avg_log_likelihood(reference, log_target),
                      sample_variance_scalar(amdm_finals),
                      sample_variance_scalar(base_finals),
                      sample_variance_scalar(reference),
                      skipped};
  });

  // ln(MMD) from the positive part of the unbiased MMD^2, floored.
  auto ln_mmd = [&](double mmd2) { return 0.5 * std::log(std::max(mmd2, cp.mmd_floor)); };

  CsvTable table({"seed", "bandwidth", "method", "mmd2", "ln_mmd", "ll", "var", "skipped_optimizations"});
  std::vector<double> ln_a, ln_b, ll_a, ll_b, ll_r, var_a, var_b, var_r;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const auto seed = static_cast<long long>(ctx.trial_seed(i));
    table.add_row({seed, r.bandwidth, std::string("amdm"), r.mmd2_amdm, ln_mmd(r.mmd2_amdm), r.ll_amdm, r.var_amdm,
                   static_cast<long long>(r.skipped)});
    table.add_row({seed, r.bandwidth, std::string("baseline"), r.mmd2_base, ln_mmd(r.mmd2_base), r.ll_base,
                   r.var_base, 0LL});
    table.add_row({seed, r.bandwidth, std::string("reference"), 0.0, ln_mmd(0.0), r.ll_ref, r.var_ref, 0LL});
    ln_a.push_back(ln_mmd(r.mmd2_amdm));
    ln_b.push_back(ln_mmd(r.mmd2_base));
    ll_a.push_back(r.ll_amdm);
    ll_b.push_back(r.ll_base);
    ll_r.push_back(r.ll_ref);
    var_a.push_back(r.var_amdm);
    var_b.push_back(r.var_base);
    var_r.push_back(r.var_ref);
    skipped += r.skipped;
  }
  ctx.write(table, "composition.csv");

  const auto ia = t_interval(ln_a, cp.confidence);
  const auto ib = t_interval(ln_b, cp.confidence);
  const auto la = t_interval(ll_a, cp.confidence);
  const auto lb = t_interval(ll_b, cp.confidence);
  CsvTable summary({"method", "ln_mmd_mean", "ln_mmd_lo", "ln_mmd_hi", "ll_mean", "ll_lo", "ll_hi", "var_mean"});
  summary.add_row({std::string("amdm"), ia.mean, ia.lo, ia.hi, la.mean, la.lo, la.hi, mean_of(var_a)});
  summary.add_row({std::string("baseline"), ib.mean, ib.lo, ib.hi, lb.mean, lb.lo, lb.hi, mean_of(var_b)});
  ctx.write(summary, "composition_summary.csv");

  ctx.metric("amdm_ln_mmd_mean", ia.mean);
  ctx.metric("amdm_ln_mmd_lo", ia.lo);
  ctx.metric("amdm_ln_mmd_hi", ia.hi);
  ctx.metric("baseline_ln_mmd_mean", ib.mean);
  ctx.metric("baseline_ln_mmd_lo", ib.lo);
  ctx.metric("baseline_ln_mmd_hi", ib.hi);
  ctx.metric("amdm_ll_mean", la.mean);
  ctx.metric("amdm_ll_lo", la.lo);
  ctx.metric("amdm_ll_hi", la.hi);
  ctx.metric("baseline_ll_mean", lb.mean);
  ctx.metric("baseline_ll_lo", lb.lo);
  ctx.metric("baseline_ll_hi", lb.hi);
  ctx.metric("reference_ll_mean", mean_of(ll_r));
  ctx.metric("amdm_var_mean", mean_of(var_a));
  ctx.metric("baseline_var_mean", mean_of(var_b));
  ctx.metric("reference_var_mean", mean_of(var_r));
  ctx.metric("amdm_skipped_optimizations", static_cast<double>(skipped));
  // Gaps between the intervals; positive means they do not overlap in the
  // expected direction.
  ctx.check("ln_mmd_interval_gap", ia.lo - ib.hi, Relation::kGreater, 0.0);
  ctx.check("ll_interval_gap", lb.lo - la.hi, Relation::kGreater, 0.0);
}

void write_summary(Context& ctx) {
  CsvTable checks({"experiment", "check", "value", "relation", "threshold", "pass"});
  for (const auto& c : ctx.report.checks)
    checks.add_row({ctx.report.id, c.name, c.value, std::string(relation_symbol(c.relation)), c.threshold, c.pass});
  ctx.write(checks, "summary.csv");
  CsvTable metrics({"experiment", "metric", "value"});
  for (const auto& [name, value] : ctx.report.metrics) metrics.add_row({ctx.report.id, name, value});
  ctx.write(metrics, "metrics.csv");
}

}  // namespace

std::string_view relation_symbol(Relation r) {
  switch (r) {
    case Relation::kLess: return "<";
    case Relation::kLessEqual: return "<=";
    case Relation::kGreater: return ">";
    case Relation::kGreaterEqual: return ">=";
    case Relation::kEqual: return "==";
  }
  return "?";
}

Check make_check(std::string name, double value, Relation relation, double threshold) {
  bool pass = false;
  switch (relation) {
    case Relation::kLess: pass = value < threshold; break;
    case Relation::kLessEqual: pass = value <= threshold; break;
    case Relation::kGreater: pass = value > threshold; break;
    case Relation::kGreaterEqual: pass = value >= threshold; break;
    case Relation::kEqual: pass = value == threshold; break;
  }
  return {std::move(name), value, relation, threshold, pass};
}

bool ExperimentReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

double ExperimentReport::metric(const std::string& name) const {
  for (const auto& [n, v] : metrics)
    if (n == name) return v;
  throw std::out_of_range("no metric named " + name);
}

const Check& ExperimentReport::check(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw std::out_of_range("no check named " + name);
}

Interval t_interval(const std::vector<double>& xs, double confidence) {
  if (xs.size() < 2) throw std::invalid_argument("t_interval needs at least two values");
  if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("confidence must lie in (0, 1)");
  const double n = static_cast<double>(xs.size());
  const double mean = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double se = std::sqrt(ss / (n - 1.0) / n);
  const boost::math::students_t dist(n - 1.0);
  const double q = boost::math::quantile(dist, 0.5 + confidence / 2.0);
  return {mean, mean - q * se, mean + q * se};
}

ExperimentReport run_experiment(const ExperimentConfig& config, unsigned workers) {
  validate(config);
  ExperimentReport report;
  report.id = config.id;
  report.kind = config.kind;

  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + config.output_dir.string() + ": " + ec.message());

  Context ctx{config, std::max(1u, workers), config.make_schedule(), config.make_models(), config.conditions(), {},
              report};
  if (config.kind != ExperimentKind::kTheoryChecks)
    ctx.substeps = uniform_substeps(ctx.schedule, config.sampler.substeps);

  switch (config.kind) {
    case ExperimentKind::kAmdm: run_amdm(ctx); break;
    case ExperimentKind::kAblationLinear: run_ablation_linear(ctx); break;
    case ExperimentKind::kAblationStage: run_ablation_stage(ctx); break;
    case ExperimentKind::kAblationEta: run_ablation_eta(ctx); break;
    case ExperimentKind::kTheoryChecks: run_theory(ctx); break;
    case ExperimentKind::kComposition2d: run_composition(ctx); break;
    case ExperimentKind::kStatsTable: run_stats_table(ctx); break;
  }
  write_summary(ctx);
  return report;
}

}  // namespace amdm::harness
