// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "granulite/error.hpp"
#include "granulite/rng.hpp"
#include "granulite/vec3.hpp"

namespace granulite {

/// Equal-weight particles on the unit torus. Total mass is 1.
struct ParticleEnsemble {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  double time = 0.0;

  std::size_t size() const { return velocities.size(); }
  bool empty() const { return velocities.empty(); }
  double particle_weight() const { return velocities.empty() ? 0.0 : 1.0 / static_cast<double>(velocities.size()); }

  friend bool operator==(const ParticleEnsemble&, const ParticleEnsemble&) = default;
};

/// Builds an ensemble at the origin with the given velocities (for oracle use).
inline ParticleEnsemble ensemble_from_velocities(std::vector<Vec3> velocities) {
  ParticleEnsemble ens;
  ens.positions.assign(velocities.size(), Vec3{});
  ens.velocities = std::move(velocities);
  return ens;
}

inline void subtract_mean_velocity(ParticleEnsemble& ens) {
  if (ens.empty()) return;
  Vec3 mean{};
  for (const auto& v : ens.velocities) mean += v;
  mean *= 1.0 / static_cast<double>(ens.size());
  for (auto& v : ens.velocities) v -= mean;
}

struct InitialCondition {
  enum class Kind { maxwellian, two_temperature, modulated };

  Kind kind = Kind::maxwellian;
  double theta = 1.0;     // Maxwellian temperature (first population for two_temperature)
  double theta2 = 1.0;    // second population temperature
  double fraction = 0.5;  // share of particles at theta
  double epsilon = 0.0;   // density modulation depth
  WaveVector k{1, 0, 0};

  static InitialCondition maxwellian(double theta) { return {Kind::maxwellian, theta}; }
  static InitialCondition two_temperature(double theta1, double theta2, double fraction) {
    return {Kind::two_temperature, theta1, theta2, fraction};
  }
  static InitialCondition modulated(double theta, double epsilon, WaveVector k) {
    return {Kind::modulated, theta, 1.0, 0.5, epsilon, k};
  }

  friend bool operator==(const InitialCondition&, const InitialCondition&) = default;
};

inline std::string to_string(InitialCondition::Kind kind) {
  switch (kind) {
    case InitialCondition::Kind::maxwellian: return "maxwellian";
    case InitialCondition::Kind::two_temperature: return "two_temperature";
    case InitialCondition::Kind::modulated: return "modulated";
  }
  return "unknown";
}

inline void validate(const InitialCondition& ic) {
  if (!(ic.theta > 0.0) || !std::isfinite(ic.theta)) throw InputError("init theta must be positive");
  if (ic.kind == InitialCondition::Kind::two_temperature) {
    if (!(ic.theta2 > 0.0) || !std::isfinite(ic.theta2)) throw InputError("init theta2 must be positive");
    if (!(ic.fraction >= 0.0 && ic.fraction <= 1.0)) throw InputError("init fraction must lie in [0, 1]");
  }
  if (ic.kind == InitialCondition::Kind::modulated) {
    if (!(ic.epsilon >= 0.0 && ic.epsilon < 1.0)) throw InputError("init epsilon must lie in [0, 1)");
    if (ic.epsilon > 0.0 && ic.k == WaveVector{0, 0, 0}) throw InputError("init wave vector must be non-zero");
  }
}

/// Samples positions and velocities, then removes the mean velocity so the
/// ensemble carries zero momentum. Particle i draws from its own stream.
inline ParticleEnsemble init_ensemble(const InitialCondition& ic, std::size_t n, std::uint64_t seed) {
  validate(ic);
  if (n == 0) throw InputError("ensemble needs at least one particle");
  ParticleEnsemble ens;
  ens.positions.resize(n);
  ens.velocities.resize(n);
  const auto n_first = static_cast<std::size_t>(std::llround(ic.fraction * static_cast<double>(n)));
  const bool modulated = ic.kind == InitialCondition::Kind::modulated && ic.epsilon > 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream vel_rng(seed, i, 0, StreamTag::init_velocity);
    double theta = ic.theta;
    if (ic.kind == InitialCondition::Kind::two_temperature && i >= n_first) theta = ic.theta2;
    ens.velocities[i] = std::sqrt(theta) * vel_rng.normal3();

    RandomStream pos_rng(seed, i, 0, StreamTag::init_position);
    Vec3 x;
    while (true) {
      x = {pos_rng.uniform(), pos_rng.uniform(), pos_rng.uniform()};
      if (!modulated) break;
      const double phase = 2.0 * std::numbers::pi * (ic.k[0] * x.x + ic.k[1] * x.y + ic.k[2] * x.z);
      if (pos_rng.uniform() * (1.0 + ic.epsilon) <= 1.0 + ic.epsilon * std::cos(phase)) break;
    }
    ens.positions[i] = x;
  }
  subtract_mean_velocity(ens);
  return ens;
}

}  // namespace granulite
