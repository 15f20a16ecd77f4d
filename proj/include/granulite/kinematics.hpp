// SPDX-License-Identifier: Apache-2.0
#pragma once

// Post-collision velocities for inelastic smooth hard spheres, in the impact
// direction (n) and the scattering direction (sigma) parametrizations.

#include <algorithm>
#include <cmath>

#include "granulite/error.hpp"
#include "granulite/restitution.hpp"
#include "granulite/vec3.hpp"

namespace granulite {

struct CollisionPair {
  Vec3 v;
  Vec3 v_star;
};

struct CollisionOutcome {
  Vec3 v_prime;
  Vec3 v_star_prime;
  double impact_speed = 0.0;
  double e_used = 1.0;
  double delta_energy = 0.0;  // |v'|^2 + |v'_*|^2 - |v|^2 - |v_*|^2, never positive
};

namespace detail {

inline void require_unit(const Vec3& n, const char* name) {
  if (!is_finite(n) || std::abs(norm(n) - 1.0) > 1e-12) throw InputError(std::string(name) + " must be a unit vector");
}

}  // namespace detail

/// Energy change of a pair scattered into direction sigma with restitution e_used.
inline double energy_loss(const CollisionPair& pair, const Vec3& sigma, double e_used) {
  if (!(e_used > 0.0 && e_used <= 1.0)) throw InputError("e_used must lie in (0, 1]");
  const Vec3 u = pair.v - pair.v_star;
  const double speed = norm(u);
  if (speed == 0.0) return 0.0;
  const double cos_t = std::clamp(dot(u, sigma) / speed, -1.0, 1.0);
  return -speed * speed * (1.0 - cos_t) / 4.0 * (1.0 - e_used * e_used);
}

inline CollisionOutcome post_collision_n(const CollisionPair& pair, const Vec3& n_hat, const RestitutionModel& model,
                                         double lambda) {
  detail::require_unit(n_hat, "n_hat");
  const Vec3 u = pair.v - pair.v_star;
  const double un = dot(u, n_hat);
  CollisionOutcome out;
  out.impact_speed = std::abs(un);
  out.e_used = eval_scaled(model, lambda, out.impact_speed);
  const double k = 0.5 * (1.0 + out.e_used) * un;
  out.v_prime = pair.v - k * n_hat;
  out.v_star_prime = pair.v_star + k * n_hat;
  out.delta_energy = -0.5 * un * un * (1.0 - out.e_used * out.e_used);
  return out;
}

/// Throws DegeneratePairError when v == v_* (no relative direction).
inline CollisionOutcome post_collision_sigma(const CollisionPair& pair, const Vec3& sigma,
                                             const RestitutionModel& model, double lambda) {
  detail::require_unit(sigma, "sigma");
  const Vec3 u = pair.v - pair.v_star;
  const double speed = norm(u);
  if (speed == 0.0) throw DegeneratePairError("sigma parametrization undefined for v == v_*");
  const double cos_t = std::clamp(dot(u, sigma) / speed, -1.0, 1.0);
  CollisionOutcome out;
  out.impact_speed = speed * std::sqrt(0.5 * (1.0 - cos_t));
  out.e_used = eval_scaled(model, lambda, out.impact_speed);
  const Vec3 w = 0.25 * (1.0 + out.e_used) * (u - speed * sigma);
  out.v_prime = pair.v - w;
  out.v_star_prime = pair.v_star + w;
  out.delta_energy = -speed * speed * (1.0 - cos_t) / 4.0 * (1.0 - out.e_used * out.e_used);
  return out;
}

/// sigma = u_hat - 2 (u_hat . n_hat) n_hat, the reflection of u_hat through the impact plane.
inline Vec3 sigma_from_n(const Vec3& u_hat, const Vec3& n_hat) {
  detail::require_unit(u_hat, "u_hat");
  detail::require_unit(n_hat, "n_hat");
  return u_hat - 2.0 * dot(u_hat, n_hat) * n_hat;
}

}  // namespace granulite
