// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "granulite/kinematics.hpp"

using namespace granulite;

namespace {

void expect_vec(const Vec3& got, const Vec3& want, double tol = 1e-15) {
  for (int d = 0; d < 3; ++d) EXPECT_NEAR(got[d], want[d], tol) << "component " << d;
}

struct Draws {
  std::mt19937_64 gen{20240611};
  std::normal_distribution<double> normal{0.0, 1.0};
  std::uniform_real_distribution<double> unit{0.0, 1.0};

  Vec3 gaussian(double scale = 1.0) { return scale * Vec3{normal(gen), normal(gen), normal(gen)}; }
  Vec3 direction() {
    Vec3 g = gaussian();
    return (1.0 / norm(g)) * g;
  }
  RestitutionModel model() {
    switch (gen() % 3) {
      case 0: return RestitutionModel::constant(0.05 + 0.95 * unit(gen));
      case 1: return RestitutionModel::viscoelastic(0.05 + 3.0 * unit(gen));
      default: return RestitutionModel::capped(0.1 + 2.0 * unit(gen), 0.1 + 0.9 * unit(gen), 0.5 + 0.4 * unit(gen));
    }
  }
};

double pair_energy(const Vec3& a, const Vec3& b) { return norm2(a) + norm2(b); }

}  // namespace

TEST(Kinematics, ElasticHeadOnSwaps) {
  const auto out = post_collision_n({{1, 0, 0}, {-1, 0, 0}}, {1, 0, 0}, RestitutionModel::constant(1.0), 0.0);
  expect_vec(out.v_prime, {-1, 0, 0});
  expect_vec(out.v_star_prime, {1, 0, 0});
  EXPECT_EQ(out.delta_energy, 0.0);
}

TEST(Kinematics, InelasticHeadOn) {
  const auto out = post_collision_n({{1, 0, 0}, {-1, 0, 0}}, {1, 0, 0}, RestitutionModel::constant(0.5), 0.3);
  expect_vec(out.v_prime, {-0.5, 0, 0});
  expect_vec(out.v_star_prime, {0.5, 0, 0});
  EXPECT_DOUBLE_EQ(out.delta_energy, -1.5);
  EXPECT_DOUBLE_EQ(out.impact_speed, 2.0);
}

TEST(Kinematics, TangentialComponentUntouched) {
  const auto out = post_collision_n({{1, 1, 0}, {0, 0, 0}}, {0, 1, 0}, RestitutionModel::constant(1.0), 0.0);
  expect_vec(out.v_prime, {1, 0, 0});
  expect_vec(out.v_star_prime, {0, 1, 0});
}

TEST(Kinematics, NonUnitNormalRejected) {
  EXPECT_THROW(post_collision_n({{1, 0, 0}, {0, 0, 0}}, {2, 0, 0}, RestitutionModel::constant(1.0), 0.0),
               InputError);
  EXPECT_THROW(post_collision_sigma({{1, 0, 0}, {0, 0, 0}}, {0, 0, 0}, RestitutionModel::constant(1.0), 0.0),
               InputError);
}

TEST(Kinematics, SigmaAlongRelativeVelocityIsNoCollision) {
  const CollisionPair pair{{0.3, -1.2, 2.0}, {-0.7, 0.4, 1.0}};
  const Vec3 u = pair.v - pair.v_star;
  const auto out = post_collision_sigma(pair, (1.0 / norm(u)) * u, RestitutionModel::viscoelastic(1.0), 0.5);
  EXPECT_EQ(out.impact_speed, 0.0);
  EXPECT_EQ(out.e_used, 1.0);
  expect_vec(out.v_prime, pair.v);
  expect_vec(out.v_star_prime, pair.v_star);
}

TEST(Kinematics, SigmaHeadOn) {
  const auto out = post_collision_sigma({{1, 0, 0}, {-1, 0, 0}}, {-1, 0, 0}, RestitutionModel::constant(0.5), 0.1);
  EXPECT_DOUBLE_EQ(out.impact_speed, 2.0);
  expect_vec(out.v_prime, {-0.5, 0, 0});
  expect_vec(out.v_star_prime, {0.5, 0, 0});
}

TEST(Kinematics, DegeneratePairSignalled) {
  EXPECT_THROW(post_collision_sigma({{1, 2, 3}, {1, 2, 3}}, {0, 0, 1}, RestitutionModel::constant(0.5), 0.1),
               DegeneratePairError);
}

TEST(Kinematics, EnergyLossExamples) {
  EXPECT_EQ(energy_loss({{1, 0, 0}, {-1, 0, 0}}, {0, 1, 0}, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(energy_loss({{1, 0, 0}, {-1, 0, 0}}, {-1, 0, 0}, 0.5), -1.5);
  EXPECT_THROW(energy_loss({{1, 0, 0}, {-1, 0, 0}}, {-1, 0, 0}, 0.0), InputError);
}

TEST(Kinematics, SigmaFromNExamples) {
  expect_vec(sigma_from_n({1, 0, 0}, {1, 0, 0}), {-1, 0, 0});
  expect_vec(sigma_from_n({1, 0, 0}, {0, 1, 0}), {1, 0, 0});
}

TEST(Kinematics, RandomDrawProperties) {
  Draws draws;
  for (int i = 0; i < 100000; ++i) {
    const CollisionPair pair{draws.gaussian(2.0), draws.gaussian(2.0)};
    const Vec3 n_hat = draws.direction();
    const auto model = draws.model();
    const double lambda = draws.unit(draws.gen);
    const Vec3 u = pair.v - pair.v_star;
    const double scale = 1.0 + norm(pair.v) + norm(pair.v_star);

    const auto by_n = post_collision_n(pair, n_hat, model, lambda);
    const Vec3 sigma = sigma_from_n((1.0 / norm(u)) * u, n_hat);
    const auto by_sigma = post_collision_sigma(pair, sigma, model, lambda);

    // The two parametrizations agree.
    for (int d = 0; d < 3; ++d) {
      ASSERT_NEAR(by_sigma.v_prime[d], by_n.v_prime[d], 1e-12 * scale);
      ASSERT_NEAR(by_sigma.v_star_prime[d], by_n.v_star_prime[d], 1e-12 * scale);
    }

    // Momentum conserved.
    const Vec3 drift = (by_sigma.v_prime + by_sigma.v_star_prime) - (pair.v + pair.v_star);
    ASSERT_LE(norm(drift), 1e-13 * scale);

    // Energy change recomputed from the outgoing velocities.
    const double direct = pair_energy(by_sigma.v_prime, by_sigma.v_star_prime) - pair_energy(pair.v, pair.v_star);
    const double formula = energy_loss(pair, sigma, by_sigma.e_used);
    ASSERT_NEAR(direct, formula, 1e-12 * scale * scale);
    ASSERT_NEAR(by_sigma.delta_energy, formula, 1e-12 * scale * scale);
    ASSERT_LE(by_sigma.delta_energy, 0.0);
    if (by_sigma.e_used < 1.0 && by_sigma.impact_speed > 1e-6) ASSERT_LT(by_sigma.delta_energy, 0.0);
  }
}

TEST(Kinematics, ElasticConservesEnergyExactly) {
  Draws draws;
  for (int i = 0; i < 1000; ++i) {
    const CollisionPair pair{draws.gaussian(), draws.gaussian()};
    const auto out = post_collision_sigma(pair, draws.direction(), RestitutionModel::viscoelastic(1.0), 0.0);
    EXPECT_EQ(out.e_used, 1.0);
    EXPECT_EQ(out.delta_energy, 0.0);
    EXPECT_NEAR(pair_energy(out.v_prime, out.v_star_prime), pair_energy(pair.v, pair.v_star), 1e-13);
  }
}
