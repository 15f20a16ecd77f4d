// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "granulite/restitution.hpp"
#include "oracle_fixtures.hpp"

using namespace granulite;

namespace {

std::vector<double> linear_grid(double step, double top) {
  std::vector<double> g;
  for (int i = 0; i * step <= top + 1e-12; ++i) g.push_back(i * step);
  return g;
}

double visco_residual(double a, double r) {
  const double e = eval(RestitutionModel::viscoelastic(a), r);
  return e + a * std::pow(r, 0.2) * std::pow(e, 0.6) - 1.0;
}

}  // namespace

TEST(Restitution, ViscoelasticAtRestIsElastic) {
  EXPECT_EQ(eval(RestitutionModel::viscoelastic(1.0), 0.0), 1.0);
}

TEST(Restitution, ViscoelasticMatchesHighPrecisionRoots) {
  EXPECT_NEAR(eval(RestitutionModel::viscoelastic(1.0), 1.0), oracle::kViscoE_a1_r1, 1e-14);
  EXPECT_NEAR(eval(RestitutionModel::viscoelastic(1.0), 32.0), oracle::kViscoE_a1_r32, 1e-14);
  EXPECT_NEAR(eval(RestitutionModel::viscoelastic(0.5), 1e4), oracle::kViscoE_a05_r1e4, 1e-14);
}

TEST(Restitution, ConstantIgnoresSpeed) {
  EXPECT_EQ(eval(RestitutionModel::constant(0.9), 7.3), 0.9);
  EXPECT_EQ(eval_scaled(RestitutionModel::constant(0.5), 0.37, 2.0), 0.5);
}

TEST(Restitution, ScaledLaw) {
  const auto m = RestitutionModel::viscoelastic(1.0);
  EXPECT_EQ(eval_scaled(m, 0.0, 5.0), 1.0);
  EXPECT_NEAR(eval_scaled(m, 0.5, 2.0), oracle::kViscoE_a1_r1, 1e-14);
}

TEST(Restitution, RejectsBadInput) {
  const auto m = RestitutionModel::viscoelastic(1.0);
  EXPECT_THROW(eval(m, std::numeric_limits<double>::quiet_NaN()), InputError);
  EXPECT_THROW(eval(m, -1.0), InputError);
  EXPECT_THROW(eval_scaled(m, 1.5, 1.0), InputError);
  EXPECT_THROW(eval_scaled(m, -0.1, 1.0), InputError);
  EXPECT_THROW(RestitutionModel::constant(0.0), InputError);
  EXPECT_THROW(RestitutionModel::constant(1.2), InputError);
  EXPECT_THROW(RestitutionModel::viscoelastic(0.0), InputError);
}

TEST(Restitution, ImplicitResidualOverWideRange) {
  for (double a : {0.05, 1.0, 3.0}) {
    double worst = 0.0;
    for (int i = 0; i <= 4000; ++i) worst = std::max(worst, std::abs(visco_residual(a, 1e4 * i / 4000.0)));
    for (int k = -30; k <= 4; ++k) worst = std::max(worst, std::abs(visco_residual(a, std::pow(10.0, k))));
    EXPECT_LE(worst, 1e-12) << "a=" << a;
  }
}

TEST(Restitution, ValuesInUnitInterval) {
  const std::vector<RestitutionModel> models{RestitutionModel::constant(0.3), RestitutionModel::viscoelastic(1.0),
                                             RestitutionModel::capped(2.0, 0.5, 0.4)};
  for (const auto& m : models) {
    for (int k = -40; k <= 40; ++k) {
      const double e = eval(m, std::pow(10.0, 0.25 * k));
      EXPECT_GT(e, 0.0);
      EXPECT_LE(e, 1.0);
    }
  }
}

TEST(Restitution, ViscoelasticPassesAllClauses) {
  const auto rep = check_assumptions(RestitutionModel::viscoelastic(1.0), linear_grid(0.1, 10.0));
  EXPECT_TRUE(rep.non_increasing);
  EXPECT_TRUE(rep.r_e_increasing);
  ASSERT_TRUE(rep.expansion.has_value());
  EXPECT_TRUE(*rep.expansion);
  EXPECT_NEAR(rep.gamma, 0.2, 1e-3);
  EXPECT_NEAR(rep.gamma_bar, 0.4, 1e-2);
  EXPECT_NEAR(rep.a, 1.0, 1e-2);
  EXPECT_TRUE(std::isfinite(rep.b));
}

TEST(Restitution, ConstantExpansionNotApplicable) {
  const auto rep = check_assumptions(RestitutionModel::constant(0.8), linear_grid(0.1, 10.0));
  EXPECT_TRUE(rep.non_increasing);
  EXPECT_TRUE(rep.r_e_increasing);
  EXPECT_FALSE(rep.expansion.has_value());
  EXPECT_TRUE(rep.all_pass());
}

TEST(Restitution, CappedMonotonicityNeedsLargeEnoughFloor) {
  // r e(r) is increasing across the cap only when e_min >= gamma / (1 + gamma).
  const auto grid = linear_grid(0.01, 10.0);
  EXPECT_FALSE(check_assumptions(RestitutionModel::capped(2.0, 0.5, 0.1), grid).r_e_increasing);
  const auto ok = check_assumptions(RestitutionModel::capped(2.0, 0.5, 0.4), grid);
  EXPECT_TRUE(ok.all_pass());
  EXPECT_NEAR(ok.gamma, 0.5, 1e-6);
  EXPECT_NEAR(ok.a, 2.0, 1e-5);
}

TEST(Restitution, UnsortedGridRejected) {
  const std::vector<double> grid{0.0, 1.0, 0.5};
  EXPECT_THROW(check_assumptions(RestitutionModel::viscoelastic(1.0), grid), InputError);
}

TEST(Restitution, ExpansionParameters) {
  EXPECT_EQ(expansion_params(RestitutionModel::viscoelastic(1.0)), (ExpansionParams{1.0, 0.2, 0.4, 0.2}));
  EXPECT_EQ(expansion_params(RestitutionModel::constant(0.9)).gamma, 1.0);
  const auto capped = expansion_params(RestitutionModel::capped(3.0, 0.5, 0.5));
  EXPECT_EQ(capped.a, 3.0);
  EXPECT_EQ(capped.gamma, 0.5);
  EXPECT_EQ(capped.gamma_bar, 1.0);
  EXPECT_EQ(expansion_params(RestitutionModel::capped(1.0, 0.3, 0.5)).gamma_bar, 0.6);
}

TEST(Restitution, SmallSpeedRemainderHasFiniteConstant) {
  // (e - 1 + r^{1/5}) / r^{2/5} settles to a finite limit as r -> 0.
  const auto m = RestitutionModel::viscoelastic(1.0);
  auto ratio = [&](double r) { return std::abs(eval(m, r) - 1.0 + std::pow(r, 0.2)) / std::pow(r, 0.4); };
  double sup = 0.0;
  for (int k = 1; k <= 60; ++k) sup = std::max(sup, ratio(0.1 * std::pow(10.0, -0.2 * k)));
  EXPECT_LT(sup, 1.0);
  EXPECT_NEAR(ratio(1e-14), ratio(1e-12), 0.01);
}
