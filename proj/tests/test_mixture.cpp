#include "amdm/mixture.hpp"
#include "amdm/rng.hpp"
#include "amdm/schedule.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace amdm;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Isotropic Gaussian pdf written out from scratch.
double gauss_pdf(const Vector& z, const Vector& mu, double var) {
  const double n = static_cast<double>(z.size());
  return std::exp(-(z - mu).squaredNorm() / (2.0 * var)) / std::pow(2.0 * std::numbers::pi * var, n / 2.0);
}

// Two components at (+-1, 0) with variance 0.5, weights 0.3 / 0.7; condition
// "right" selects the second.
MixtureModel two_component() {
  return MixtureModel({{vec({-1, 0}), 0.5}, {vec({1, 0}), 0.5}}, {0.3, 0.7}, {{"right", {1}}});
}

}  // namespace

TEST_SUITE("mixture") {
  TEST_CASE("construction invariants") {
    const auto m = two_component();
    const auto& w = m.unconditional().weights();
    CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.has_condition(std::string(kUnconditional)));
    CHECK(m.condition_map().at(std::string(kUnconditional)).size() == 2);
    CHECK(m.condition_mass("right") == doctest::Approx(0.7));
    CHECK(m.conditional("right").components().size() == 1);

    CHECK_THROWS_AS(MixtureModel({{vec({0, 0}), 0.0}}, {1.0}, {}), std::invalid_argument);
    CHECK_THROWS_AS(MixtureModel({{vec({0, 0}), 1.0}}, {1.0}, {{"x", {}}}), std::invalid_argument);
    CHECK_THROWS_AS(MixtureModel({{vec({0, 0}), 1.0}}, {1.0}, {{"x", {3}}}), std::invalid_argument);
    CHECK_THROWS_AS(MixtureModel({{vec({0, 0}), 1.0}, {vec({0}), 1.0}}, {1.0, 1.0}, {}), std::invalid_argument);
    CHECK_THROWS_AS(MixtureModel({{vec({0, 0}), 1.0}}, {1.0, 2.0}, {}), std::invalid_argument);
    CHECK_THROWS_AS(m.conditional("missing"), std::invalid_argument);
  }

  TEST_CASE("noised mixture") {
    const NoiseSchedule s({0.75});  // abar(1) = 0.25
    const MixtureModel m({{vec({2, -4}), 1.0}}, {1.0}, {});
    const Condition c{std::string(kUnconditional)};
    const auto n1 = noised_mixture(m, s, 1, c);
    CHECK(n1.components()[0].mean[0] == doctest::Approx(1.0));
    CHECK(n1.components()[0].mean[1] == doctest::Approx(-2.0));
    CHECK(n1.components()[0].variance == doctest::Approx(1.0));

    const auto n0 = noised_mixture(m, s, 0, c);
    CHECK(n0.components()[0].mean == m.unconditional().components()[0].mean);
    CHECK(n0.components()[0].variance == 1.0);

    // Terminal prior: means shrink to ~0, variances to ~1.
    const auto d = NoiseSchedule::linear(1e-4, 0.02, 1000);
    const MixtureModel unit({{vec({1, 0}), 0.3}, {vec({0, -1}), 0.3}}, {1, 1}, {});
    const auto term = noised_mixture(unit, d, 1000, c);
    const double ab = d.alpha_bar(1000);
    REQUIRE(ab < 1e-3);
    for (const auto& comp : term.components()) {
      CHECK(comp.mean.norm() < 1e-2);
      CHECK(std::abs(comp.variance - 1.0) < 1e-3);
    }
    CHECK((term.mean()).norm() < 1e-2);
    CHECK((term.coordinate_variance() - Vector::Ones(2)).cwiseAbs().maxCoeff() < 1e-3);
  }

  TEST_CASE("log density") {
    const auto d = NoiseSchedule::linear(1e-4, 0.02, 1000);
    const Condition c{std::string(kUnconditional)};
    const MixtureModel std_normal({{vec({0, 0}), 1.0}}, {1.0}, {});
    CHECK(log_density(std_normal, d, vec({0, 0}), 0, c) == doctest::Approx(-std::log(2.0 * std::numbers::pi)));

    const MixtureModel sym({{vec({-1.5, 0}), 0.8}, {vec({1.5, 0}), 0.8}}, {1, 1}, {});
    const Vector z = vec({0, 0});
    const double expect = std::log(0.5 * gauss_pdf(z, vec({-1.5, 0}), 0.8) + 0.5 * gauss_pdf(z, vec({1.5, 0}), 0.8));
    CHECK(log_density(sym, d, z, 0, c) == doctest::Approx(expect).epsilon(1e-13));

    // Far in the tail the log-sum-exp keeps the value finite.
    CHECK(std::isfinite(log_density(sym, d, vec({80, 80}), 0, c)));
  }

  TEST_CASE("density integrates to one") {
    const auto m = two_component();
    const auto& g = m.unconditional();
    // Midpoint rule on [-6, 6] x [-5, 5].
    const int n = 400;
    const double hx = 12.0 / n, hy = 10.0 / n;
    double total = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) total += std::exp(g.log_density(vec({-6 + (i + 0.5) * hx, -5 + (j + 0.5) * hy})));
    CHECK(total * hx * hy == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("epsilon of a standard Gaussian") {
    const auto d = NoiseSchedule::linear(1e-4, 0.02, 1000);
    const MixtureModel m({{vec({0, 0, 0}), 1.0}}, {1.0}, {});
    const Condition c{std::string(kUnconditional)};
    const Vector z = vec({0.3, -1.2, 2.0});
    for (int t : {1, 250, 1000}) {
      const Vector eps = epsilon_pred(m, d, z, t, c);
      CHECK((eps - std::sqrt(1.0 - d.alpha_bar(t)) * z).norm() < 1e-12);
    }
    CHECK_THROWS_AS(epsilon_pred(m, d, z, 0, c), std::out_of_range);
  }

  TEST_CASE("epsilon is zero along the axis at the symmetric midpoint") {
    const auto d = NoiseSchedule::linear(1e-4, 0.02, 1000);
    const MixtureModel sym({{vec({-2, 0}), 0.5}, {vec({2, 0}), 0.5}}, {1, 1}, {});
    const Vector eps = epsilon_pred(sym, d, vec({0, 0.7}), 300, Condition{std::string(kUnconditional)});
    CHECK(std::abs(eps[0]) < 1e-14);
  }

  TEST_CASE("epsilon matches finite differences of the log density") {
    const auto d = NoiseSchedule::linear(1e-4, 0.02, 1000);
    const MixtureModel m({{vec({-1, 0.5}), 0.4}, {vec({1.5, -0.5}), 0.2}, {vec({0, 2}), 0.7}}, {0.2, 0.5, 0.3},
                         {{"pair", {0, 2}}});
    RngStream rng(5);
    const double h = 1e-5;
    double worst = 0.0;
    for (const char* label : {"pair", "uncond"}) {
      const Condition c{label};
      for (int k = 0; k < 100; ++k) {
        const int t = 1 + static_cast<int>(rng.uniform() * 999);
        const Vector z = 1.5 * rng.normal_vector(2);
        const Vector eps = epsilon_pred(m, d, z, t, c);
        Vector fd(2);
        for (int i = 0; i < 2; ++i) {
          Vector zp = z, zm = z;
          zp[i] += h;
          zm[i] -= h;
          fd[i] = (log_density(m, d, zp, t, c) - log_density(m, d, zm, t, c)) / (2 * h);
        }
        worst = std::max(worst, (eps + std::sqrt(1.0 - d.alpha_bar(t)) * fd).cwiseAbs().maxCoeff());
      }
    }
    CHECK(worst < 1e-5);
  }

  TEST_CASE("classifier-free guidance") {
    const auto d = NoiseSchedule::linear(1e-4, 0.02, 1000);
    const auto m = two_component();
    const Vector z = vec({0.4, -0.3});
    const int t = 100;

    const Condition plain{"right", 0.0};
    CHECK((cfg_epsilon(m, d, z, t, plain) - epsilon_pred(m, d, z, t, plain)).norm() == 0.0);

    // Single-component model: conditional equals unconditional for any g.
    const MixtureModel single({{vec({1, 1}), 0.5}}, {1.0}, {{"only", {0}}});
    for (double g : {0.0, 1.0, 7.5})
      CHECK((cfg_epsilon(single, d, z, t, {"only", g}) - epsilon_pred(single, d, z, t, {"only", 0.0})).norm() <
            1e-12);

    // g = 1 by hand: eps = 2 eps_c - eps_u with both scores written out.
    const double ab = d.alpha_bar(t);
    const double var = ab * 0.5 + (1 - ab);
    const Vector mu0 = std::sqrt(ab) * vec({-1, 0}), mu1 = std::sqrt(ab) * vec({1, 0});
    const double p0 = 0.3 * gauss_pdf(z, mu0, var), p1 = 0.7 * gauss_pdf(z, mu1, var);
    const Vector score_c = -(z - mu1) / var;
    const Vector score_u = (p0 * (-(z - mu0) / var) + p1 * (-(z - mu1) / var)) / (p0 + p1);
    const double k = -std::sqrt(1 - ab);
    const Vector expect = 2.0 * (k * score_c) - k * score_u;
    CHECK((cfg_epsilon(m, d, z, t, {"right", 1.0}) - expect).norm() < 1e-12);
    CHECK_THROWS_AS(cfg_epsilon(m, d, z, t, {"right", -1.0}), std::invalid_argument);
  }

  TEST_CASE("conditional density is dominated by the scaled unconditional") {
    const auto d = NoiseSchedule::linear(1e-4, 0.02, 1000);
    const auto m = two_component();
    RngStream rng(9);
    for (int k = 0; k < 200; ++k) {
      const int t = static_cast<int>(rng.uniform() * 1000);
      const Vector z = 2.0 * rng.normal_vector(2);
      const double lc = log_density(m, d, z, t, {"right"});
      const double lu = log_density(m, d, z, t, {"uncond"});
      CHECK(lc <= lu - std::log(m.condition_mass("right")) + 1e-12);
    }
  }

  TEST_CASE("sampling moments") {
    const auto m = two_component();
    const auto& g = m.unconditional();
    RngStream rng(3);
    const int draws = 100000;
    Vector mean = Vector::Zero(2);
    double sq = 0.0;
    for (int k = 0; k < draws; ++k) {
      const Vector z = g.sample(rng);
      mean += z;
      sq += z.squaredNorm();
    }
    mean /= draws;
    // E z = 0.3 (-1, 0) + 0.7 (1, 0) = (0.4, 0); E ||z||^2 = 1 + 2 * 0.5.
    CHECK(mean[0] == doctest::Approx(0.4).epsilon(0.02));
    CHECK(std::abs(mean[1]) < 0.01);
    CHECK(sq / draws == doctest::Approx(2.0).epsilon(0.01));
    CHECK(g.second_moment() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(g.mean()[0] == doctest::Approx(0.4).epsilon(1e-12));
  }
}
