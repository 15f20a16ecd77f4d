// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "granulite/dsmc.hpp"
#include "granulite/observables.hpp"

using namespace granulite;

namespace {

double total_energy(const ParticleEnsemble& e) {
  double acc = 0.0;
  for (const auto& v : e.velocities) acc += norm2(v);
  return acc * e.particle_weight();
}

Vec3 total_momentum(const ParticleEnsemble& e) {
  Vec3 p{};
  for (const auto& v : e.velocities) p += v;
  return e.particle_weight() * p;
}

SimConfig config(double lambda, RestitutionModel model, std::size_t n, bool thermostat = true) {
  SimConfig c;
  c.lambda = lambda;
  c.model = model;
  c.n_particles = n;
  c.thermostat = thermostat;
  c.seed = 77;
  return c;
}

}  // namespace

TEST(Dsmc, TransportWrapsOnTorus) {
  auto ens = ensemble_from_velocities({{1, 0, 0}, {0, 0, 0}});
  ens.positions = {{0.75, 0, 0}, {0.3, 0.6, 0.9}};
  transport_step(ens, 0.5);
  EXPECT_DOUBLE_EQ(ens.positions[0].x, 0.25);
  EXPECT_EQ(ens.positions[1], (Vec3{0.3, 0.6, 0.9}));
  EXPECT_THROW(transport_step(ens, 0.0), InputError);
}

TEST(Dsmc, ThermostatOffAtZeroLambda) {
  auto ens = init_ensemble(InitialCondition::maxwellian(1.0), 1000, 1);
  const auto before = ens.velocities;
  thermostat_step(ens, 0.0, 1.0, 0.01, true, 1, 1);
  EXPECT_EQ(ens.velocities, before);
}

TEST(Dsmc, ThermostatInjectsSixLambdaGammaPerUnitTime) {
  const std::size_t n = 100000;
  auto ens = init_ensemble(InitialCondition::maxwellian(1.0), n, 2);
  const double e0 = total_energy(ens);
  const double lambda = 0.2, gamma = 0.2, dt = 0.01;
  thermostat_step(ens, lambda, gamma, dt, true, 3, 1);
  const double injected = 6.0 * std::pow(lambda, gamma) * dt;
  // Each kick adds 2 v.xi + |xi|^2; both pieces fluctuate at order sqrt(dt / N).
  const double tol = 4.0 * std::sqrt(2.0 * std::pow(lambda, gamma) * dt) * 2.0 * std::sqrt(3.0 / n);
  EXPECT_NEAR(total_energy(ens) - e0, injected, tol);
  EXPECT_LE(norm(total_momentum(ens)), 1e-13);
}

TEST(Dsmc, IdenticalVelocitiesNeverCollide) {
  auto ens = ensemble_from_velocities({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
  CellGrid grid;
  grid.rebuild(ens);
  const auto stats = collision_step(ens, grid, RestitutionModel::constant(0.5), 0.5, 0.1, 1, 1);
  EXPECT_EQ(stats.collisions, 0u);
  EXPECT_EQ(ens.velocities[0], (Vec3{1, 2, 3}));
}

TEST(Dsmc, CollisionBookkeepingAndConservation) {
  auto ens = init_ensemble(InitialCondition::two_temperature(0.5, 2.0, 0.5), 20000, 3);
  CellGrid grid;
  grid.counts = {2, 2, 2};
  const auto model = RestitutionModel::viscoelastic(1.0);
  const double dt = auto_dt(ens);
  double observed = 0.0;
  std::size_t seen = 0;
  for (std::uint64_t step = 1; step <= 20; ++step) {
    grid.rebuild(ens);
    const double e_before = total_energy(ens);
    const Vec3 p_before = total_momentum(ens);
    double from_formula = 0.0;
    const auto stats = collision_step(ens, grid, model, 0.5, dt, 9, step,
                                      [&](const CollisionPair& pair, const Vec3& sigma, const CollisionOutcome& out) {
                                        from_formula += energy_loss(pair, sigma, out.e_used);
                                        ++seen;
                                      });
    from_formula *= ens.particle_weight();
    observed += stats.energy_change;
    EXPECT_NEAR(total_energy(ens) - e_before, from_formula, 1e-12);
    EXPECT_NEAR(stats.energy_change, from_formula, 1e-12);
    EXPECT_LE(norm(total_momentum(ens) - p_before), 1e-13);
    for (std::size_t c = 0; c < grid.cell_total(); ++c) EXPECT_GT(grid.u_max[c], 0.0);
  }
  EXPECT_GT(seen, 0u);
  EXPECT_LT(observed, 0.0);
}

TEST(Dsmc, CollisionRateMatchesKineticTheory) {
  const std::size_t n = 20000;
  auto ens = init_ensemble(InitialCondition::maxwellian(1.0), n, 4);
  const double theta = moments(ens).temperature;
  const double mean_u = 4.0 * std::sqrt(theta / std::numbers::pi);
  const double dt = 0.1 / (4.0 * std::numbers::pi * mean_u);
  CellGrid grid;
  std::size_t collisions = 0;
  const int steps = 20;
  for (int s = 1; s <= steps; ++s) {
    grid.rebuild(ens);
    collisions += collision_step(ens, grid, RestitutionModel::constant(1.0), 0.0, dt, 5, s).collisions;
  }
  const double expected = steps * 0.5 * static_cast<double>(n - 1) * 4.0 * std::numbers::pi * mean_u * dt;
  EXPECT_NEAR(static_cast<double>(collisions), expected, 4.0 * std::sqrt(expected));
}

TEST(Dsmc, OverloadedCellRaisesConfigError) {
  auto ens = init_ensemble(InitialCondition::maxwellian(1.0), 50, 5);
  CellGrid grid;
  grid.rebuild(ens);
  EXPECT_THROW(collision_step(ens, grid, RestitutionModel::constant(0.9), 0.1, 10.0, 1, 1), ConfigError);
}

TEST(Dsmc, ElasticEquilibriumIsInvariant) {
  auto c = config(0.0, RestitutionModel::constant(1.0), 5000, false);
  c.t_end = 0.5;
  ObservableSchedule sched;
  sched.moments_period = 0.05;
  const auto res = run(c, InitialCondition::maxwellian(1.0), sched);
  ASSERT_GE(res.trajectory.size(), 5u);
  const auto& first = res.trajectory.front();
  for (const auto& r : res.trajectory) {
    EXPECT_NEAR(r.energy, first.energy, 1e-12 * first.energy);
    EXPECT_LE(norm(r.momentum), 1e-13);
    EXPECT_DOUBLE_EQ(r.mass, 1.0);
  }
  EXPECT_LT(maxwellian_distance(res.final_state), 0.1);
}

TEST(Dsmc, SameSeedIsBitIdentical) {
  auto c = config(0.2, RestitutionModel::viscoelastic(1.0), 3000);
  c.cells = {2, 1, 1};
  c.t_end = 0.3;
  const auto init = InitialCondition::modulated(1.0, 0.3, {1, 0, 0});
  const auto a = run(c, init, {});
  const auto b = run(c, init, {});
  EXPECT_EQ(a.final_state.velocities, b.final_state.velocities);
  EXPECT_EQ(a.final_state.positions, b.final_state.positions);
  c.seed = 78;
  const auto other = run(c, init, {});
  EXPECT_NE(a.final_state.velocities, other.final_state.velocities);
}

TEST(Dsmc, StartRowOnlyOnSchedule) {
  auto c = config(0.1, RestitutionModel::constant(0.9), 500);
  c.dt = 0.01;
  c.t_end = 0.1;
  ObservableSchedule sched;
  sched.moments_period = 0.03;
  const auto res = run(c, InitialCondition::maxwellian(1.0), sched);
  std::vector<double> times;
  for (const auto& r : res.trajectory) times.push_back(r.time);
  const std::vector<double> want{0.0, 0.03, 0.06, 0.09, 0.1};
  ASSERT_EQ(times.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(times[i], want[i], 1e-12);
}

TEST(Dsmc, InitialConditions) {
  const std::size_t n = 100000;
  const auto m = moments(init_ensemble(InitialCondition::maxwellian(1.0), n, 6));
  EXPECT_NEAR(m.temperature, 1.0, 3.0 * std::sqrt(2.0 / (3.0 * n)));
  EXPECT_LE(norm(m.momentum), 1e-14);

  const auto flat = init_ensemble(InitialCondition::modulated(1.0, 0.0, {1, 0, 0}), n, 7);
  EXPECT_LT(std::abs(spatial_mode(flat, {1, 0, 0})), 4.0 / std::sqrt(n));

  // (1 + eps cos 2 pi x) against exp(-2 pi i x) integrates to eps / 2.
  const auto wavy = init_ensemble(InitialCondition::modulated(1.0, 0.3, {1, 0, 0}), n, 8);
  EXPECT_NEAR(std::abs(spatial_mode(wavy, {1, 0, 0})), 0.15, 4.0 / std::sqrt(n));
  EXPECT_LT(std::abs(spatial_mode(wavy, {0, 1, 0})), 4.0 / std::sqrt(n));

  EXPECT_THROW(init_ensemble(InitialCondition::maxwellian(-1.0), 10, 1), InputError);
  EXPECT_THROW(init_ensemble(InitialCondition::two_temperature(1.0, 2.0, 1.5), 10, 1), InputError);
  EXPECT_THROW(init_ensemble(InitialCondition::modulated(1.0, 1.5, {1, 0, 0}), 10, 1), InputError);
  EXPECT_THROW(init_ensemble(InitialCondition::maxwellian(1.0), 0, 1), InputError);
}

TEST(Dsmc, InvalidConfigRejected) {
  auto c = config(1.5, RestitutionModel::constant(0.5), 100);
  EXPECT_THROW(validate(c), InputError);
  c.lambda = 0.1;
  c.cells = {0, 1, 1};
  EXPECT_THROW(validate(c), InputError);
  c.cells = {1, 1, 1};
  c.n_particles = 10;
  EXPECT_THROW(Simulation(c, init_ensemble(InitialCondition::maxwellian(1.0), 11, 1)), InputError);
}
