// SPDX-License-Identifier: Apache-2.0
#include <string>

#include <gtest/gtest.h>

#include "granulite/scenario.hpp"

using namespace granulite;

namespace {

std::string parse_error_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

constexpr const char* kMinimal = R"(
lambda: 0.1
restitution:
  kind: constant
n_particles: 1e5
)";

constexpr const char* kFull = R"(
name: "full example"
lambda: 0.05
restitution: {kind: capped, a: 2.0, gamma: 0.5, e_min: 0.45}
n_particles: 20000
cells: [4, 2, 1]
dt: 0.001
t_end: 2.5
thermostat: true
momentum_projection: false
seed: 12345
init: {kind: modulated, theta: 0.4, epsilon: 0.3, k: [1, 0, 0]}
schedule:
  moments_period: 0.1
  modes: [[1, 0, 0], [0, 1, 0]]
  dissipation: true
  dissipation_samples: 5000
  tail_A: 0.25
  tail_p: 1.0
probe: {kind: none, delta: 0.05, replicas: 12}
sweep: {lambdas: [0.02, 0.05, 0.1, 0.2]}
output: {dir: out/full, checkpoint_period: 0.5}
)";

}  // namespace

TEST(Scenario, MinimalDocumentGetsDefaults) {
  const auto s = parse_scenario(kMinimal);
  EXPECT_EQ(s.lambda, 0.1);
  EXPECT_EQ(s.restitution.kind, "constant");
  EXPECT_FALSE(s.restitution.e0.has_value());
  EXPECT_EQ(s.n_particles, 100000u);
  EXPECT_EQ(s.cells, (std::array<int, 3>{1, 1, 1}));
  EXPECT_FALSE(s.dt.has_value());
  EXPECT_TRUE(s.thermostat);
  EXPECT_EQ(s.probe.kind, ProbeKind::none);
  EXPECT_EQ(s.probe.replicas, 8u);
  // e0 defaults to 1 - lambda.
  EXPECT_EQ(s.config().model, RestitutionModel::constant(0.9));
}

TEST(Scenario, FullDocumentParses) {
  const auto s = parse_scenario(kFull);
  EXPECT_EQ(s.name, "full example");
  EXPECT_EQ(s.cells, (std::array<int, 3>{4, 2, 1}));
  ASSERT_TRUE(s.dt.has_value());
  EXPECT_EQ(*s.dt, 0.001);
  ASSERT_TRUE(s.init.has_value());
  EXPECT_EQ(s.init->kind, InitialCondition::Kind::modulated);
  EXPECT_EQ(s.schedule.modes.size(), 2u);
  EXPECT_EQ(s.sweep_lambdas.size(), 4u);
  EXPECT_EQ(s.output_dir, "out/full");
  EXPECT_EQ(s.config().model, RestitutionModel::capped(2.0, 0.5, 0.45));
}

TEST(Scenario, RoundTrip) {
  for (const char* text : {kMinimal, kFull}) {
    const auto s = parse_scenario(text);
    const auto again = parse_scenario(serialize_scenario(s));
    EXPECT_EQ(again, s);
    EXPECT_EQ(serialize_scenario(again), serialize_scenario(s));
  }
  auto s = parse_scenario(kMinimal);
  s.lambda = 0.1 + 1e-17;
  s.t_end = 1.0 / 3.0;
  s.dt = 2.0 / 7.0;
  EXPECT_EQ(parse_scenario(serialize_scenario(s)), s);
}

TEST(Scenario, LambdaOutOfRange) {
  const auto msg = parse_error_of("lambda: 1.5\nrestitution: {kind: constant}\nn_particles: 100\n");
  EXPECT_NE(msg.find("lambda"), std::string::npos) << msg;
  EXPECT_NE(msg.find("[0, 1]"), std::string::npos) << msg;
}

TEST(Scenario, DuplicateSweepLambda) {
  const auto msg = parse_error_of(std::string(kMinimal) + "sweep: {lambdas: [0.1, 0.05, 0.1]}\n");
  EXPECT_NE(msg.find("sweep.lambdas"), std::string::npos) << msg;
}

TEST(Scenario, UnknownKeyCarriesLocation) {
  const auto msg = parse_error_of(std::string(kMinimal) + "schedule:\n  moment_period: 0.1\n");
  EXPECT_NE(msg.find("moment_period"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 7"), std::string::npos) << msg;
}

TEST(Scenario, MissingAndMistypedKeys) {
  EXPECT_NE(parse_error_of("restitution: {kind: constant}\nn_particles: 100\n").find("lambda"), std::string::npos);
  EXPECT_NE(parse_error_of("lambda: 0.1\nn_particles: 100\n").find("restitution"), std::string::npos);
  EXPECT_NE(parse_error_of("lambda: fast\nrestitution: {kind: constant}\nn_particles: 100\n").find("lambda"),
            std::string::npos);
  EXPECT_NE(parse_error_of("lambda: 0.1\nrestitution: {kind: bouncy}\nn_particles: 100\n").find("restitution.kind"),
            std::string::npos);
  EXPECT_NE(parse_error_of(std::string(kMinimal) + "cells: [1, 2]\n").find("cells"), std::string::npos);
  EXPECT_NE(parse_error_of("lambda: [0.1\n").find("malformed"), std::string::npos);
}

TEST(Scenario, ProbeConsistency) {
  EXPECT_NE(parse_error_of(std::string(kMinimal) + "probe: {kind: haff}\n").find("thermostat"), std::string::npos);
  EXPECT_NE(parse_error_of(std::string(kMinimal) + "probe: {kind: sweep}\n").find("sweep.lambdas"),
            std::string::npos);
  EXPECT_NE(parse_error_of(std::string(kMinimal) + "cells: [2, 1, 1]\nprobe: {kind: steady}\n").find("cells"),
            std::string::npos);
  EXPECT_NE(parse_error_of(std::string(kMinimal) + "probe: {delta: 0.3}\n").find("probe.delta"), std::string::npos);
}

TEST(Scenario, AutoTimeStep) {
  const auto s = parse_scenario(std::string(kMinimal) + "dt: auto\n");
  EXPECT_FALSE(s.dt.has_value());
}
