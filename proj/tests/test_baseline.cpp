#include "amdm/baseline.hpp"
#include "amdm/rng.hpp"
#include "amdm/sampler.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace amdm;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

const Condition kUncond{"uncond"};

}  // namespace

TEST_SUITE("baseline") {
  TEST_CASE("product score identities") {
    const auto s = NoiseSchedule::linear(1e-4, 0.02, 1000);
    const MixtureModel a({{vec({1, 0}), 0.5}, {vec({-1, 1}), 0.8}}, {1, 2}, {});
    const std::vector<DiffusionModel> one{{a, s}};
    const std::vector<Condition> c1{kUncond};
    const std::vector<DiffusionModel> two{{a, s}, {a, s}};
    const std::vector<Condition> c2{kUncond, kUncond};
    const Vector z = vec({0.3, -0.4});
    for (int t : {0, 20, 700}) {
      const Vector own = noised_mixture(a, s, t, kUncond).score(z);
      CHECK((product_score(one, s, z, t, c1) - own).norm() == 0.0);
      CHECK((product_score(two, s, z, t, c2) - 2.0 * own).norm() < 1e-14);
    }
  }

  TEST_CASE("product of two unit Gaussians") {
    const auto s = NoiseSchedule::linear(1e-4, 0.02, 1000);
    const Vector mu1 = vec({2, 0}), mu2 = vec({0, -1});
    const std::vector<DiffusionModel> models{{MixtureModel({{mu1, 1.0}}, {1.0}, {}), s},
                                             {MixtureModel({{mu2, 1.0}}, {1.0}, {}), s}};
    const std::vector<Condition> conds{kUncond, kUncond};
    RngStream rng(1);
    for (int k = 0; k < 50; ++k) {
      const Vector z = 2.0 * rng.normal_vector(2);
      // Score of N((mu1 + mu2) / 2, I / 2).
      const Vector expect = -2.0 * (z - 0.5 * (mu1 + mu2));
      CHECK((product_score(models, s, z, 0, conds) - expect).norm() < 1e-12);
      // At t > 0 both marginals stay unit-variance with shrunk means.
      const double r = std::sqrt(s.alpha_bar(300));
      const Vector expect_t = -2.0 * (z - 0.5 * r * (mu1 + mu2));
      CHECK((product_score(models, s, z, 300, conds) - expect_t).norm() < 1e-12);
    }
  }

  TEST_CASE("product score validation") {
    const auto s = NoiseSchedule::linear(1e-4, 0.02, 1000);
    const auto other = NoiseSchedule::linear(1e-4, 0.01, 1000);
    const MixtureModel a({{vec({1, 0}), 0.5}}, {1.0}, {});
    const MixtureModel b({{vec({1, 0, 0}), 0.5}}, {1.0}, {});
    const std::vector<Condition> conds{kUncond, kUncond};
    const std::vector<DiffusionModel> mixed{{a, s}, {a, other}};
    CHECK_THROWS_AS(product_score(mixed, s, vec({0, 0}), 5, conds), std::invalid_argument);
    const std::vector<DiffusionModel> dims{{a, s}, {b, s}};
    CHECK_THROWS_AS(product_score(dims, s, vec({0, 0}), 5, conds), std::invalid_argument);
    const std::vector<DiffusionModel> none;
    CHECK_THROWS_AS(product_score(none, s, vec({0, 0}), 5, {}), std::invalid_argument);
  }

  TEST_CASE("Langevin correction") {
    const ScoreFn score = [](const Vector& z) -> Vector { return -(z - vec({1, -1})) / 0.25; };
    RngStream rng(2);
    const Vector z0 = vec({5, 5});
    CHECK((langevin_correct(z0, score, 0.01, 0, rng) - z0).norm() == 0.0);

    RngStream r1(3), r2(3);
    const Vector a = langevin_correct(z0, score, 0.01, 50, r1);
    const Vector b = langevin_correct(z0, score, 0.01, 50, r2);
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 2) == 0);

    // Long chain against N((1, -1), 0.25 I). The discretized chain has
    // stationary variance 0.25 / (1 - step / (4 * 0.25)).
    RngStream rng2(4);
    Vector z = z0;
    z = langevin_correct(z, score, 0.005, 2000, rng2);
    Vector mean = Vector::Zero(2);
    double sq = 0.0;
    const int keep = 400000;
    for (int k = 0; k < keep; ++k) {
      z = langevin_correct(z, score, 0.005, 1, rng2);
      mean += z;
      sq += (z - vec({1, -1})).squaredNorm();
    }
    mean /= keep;
    CHECK((mean - vec({1, -1})).norm() < 0.05);
    CHECK(sq / keep / 2 == doctest::Approx(0.25).epsilon(0.05));

    CHECK_THROWS_AS(langevin_correct(z0, score, 0.0, 5, rng), std::invalid_argument);
    CHECK_THROWS_AS(langevin_correct(z0, score, 0.1, -1, rng), std::invalid_argument);
  }

  TEST_CASE("composition without Langevin reproduces the sampler") {
    const auto s = NoiseSchedule::linear(1e-4, 0.02, 1000);
    const auto sub = uniform_substeps(s, 50);
    const MixtureModel a({{vec({1, 0}), 0.5}, {vec({-1, 1}), 0.3}}, {1, 2}, {});
    const std::vector<DiffusionModel> one{{a, s}};
    const std::vector<Condition> c{kUncond};
    LangevinConfig cfg;
    cfg.enabled = false;
    for (double eta : {0.0, 1.0}) {
      cfg.sampler_eta = eta;
      const auto composed = composed_sample(one, c, s, sub, cfg, 8);
      const auto plain = sample(a, s, kUncond, sub, eta, 8);
      REQUIRE(composed.states.size() == plain.states.size());
      for (std::size_t k = 0; k < plain.states.size(); ++k) {
        CHECK(composed.states[k].t == plain.states[k].t);
        CHECK((composed.states[k].z - plain.states[k].z).norm() < 1e-10);
      }
    }
  }

  // Summed noised scores are not the score of the noised product, so the
  // plain chain is biased; enough Langevin correction per level removes most
  // of it. At the default 20 steps per level the variance is still ~20% low.
  TEST_CASE("composition of overlapping Gaussians matches the product") {
    const auto s = NoiseSchedule::linear(1e-4, 0.02, 1000);
    const auto sub = uniform_substeps(s, 50);
    const Vector mu1 = vec({1, 0}), mu2 = vec({0, 1});
    const double v1 = 0.5, v2 = 1.0;
    const std::vector<DiffusionModel> models{{MixtureModel({{mu1, v1}}, {1.0}, {}), s},
                                             {MixtureModel({{mu2, v2}}, {1.0}, {}), s}};
    const std::vector<Condition> conds{kUncond, kUncond};
    const Vector mean = (v2 * mu1 + v1 * mu2) / (v1 + v2);
    const double var = v1 * v2 / (v1 + v2);
    auto run = [&](const LangevinConfig& cfg, Vector& m, double& v) {
      const int n = 3000;
      VectorList finals;
      for (int k = 0; k < n; ++k) finals.push_back(composed_sample(models, conds, s, sub, cfg, k).final_state().z);
      m = Vector::Zero(2);
      for (const auto& z : finals) m += z;
      m /= n;
      double ss = 0.0;
      for (const auto& z : finals) ss += (z - m).squaredNorm();
      v = ss / (n - 1) / 2;
    };
    LangevinConfig plain;
    plain.enabled = false;
    LangevinConfig mixed;
    mixed.steps_per_level = 100;
    Vector m0, m1;
    double var0 = 0.0, var1 = 0.0;
    run(plain, m0, var0);
    run(mixed, m1, var1);
    CHECK((m1 - mean).norm() / mean.norm() < 0.05);
    CHECK(std::abs(var1 - var) / var < 0.10);
    CHECK(std::abs(var1 - var) < std::abs(var0 - var));
  }

  TEST_CASE("exact product of mixtures") {
    const GaussianMixture a({{vec({-2, 0.5}), 0.25}, {vec({2, 0.5}), 0.25}}, {1, 1});
    const GaussianMixture b({{vec({-2, -0.5}), 0.25}, {vec({2, -0.5}), 0.4}}, {1, 3});
    const auto p = product_of_mixtures(a, b);
    CHECK(p.components().size() == 4);
    // log p = log a + log b - log Z for every z.
    RngStream rng(5);
    const Vector z0 = vec({0.1, 0.2});
    const double c0 = a.log_density(z0) + b.log_density(z0) - p.log_density(z0);
    for (int k = 0; k < 50; ++k) {
      const Vector z = 3.0 * rng.normal_vector(2);
      CHECK(a.log_density(z) + b.log_density(z) - p.log_density(z) == doctest::Approx(c0).epsilon(1e-9));
    }
    const GaussianMixture c({{vec({0, 0, 0}), 1.0}}, {1.0});
    CHECK_THROWS_AS(product_of_mixtures(a, c), std::invalid_argument);
  }
}
