// SPDX-License-Identifier: Apache-2.0
#pragma once

// Particle solver for  df/dt + v.grad_x f = Q_{e_lambda}(f, f) + lambda^gamma Lap_v f
// on the unit torus. One step is transport -> collisions -> thermostat.
//
// Normalization: total mass 1 on unit volume, kernel |v - v_*| per unit sigma
// measure, so an unordered pair in a cell of volume V collides at rate
// 4 pi |u| w / V with w = 1/N.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "granulite/ensemble.hpp"
#include "granulite/error.hpp"
#include "granulite/kinematics.hpp"
#include "granulite/observables.hpp"
#include "granulite/parallel.hpp"
#include "granulite/restitution.hpp"
#include "granulite/rng.hpp"

namespace granulite {

struct SimConfig {
  double lambda = 0.0;
  RestitutionModel model;
  std::size_t n_particles = 100'000;
  std::array<int, 3> cells{1, 1, 1};
  std::optional<double> dt;  // empty: 0.1 / (4 pi <|u|>) at the initial state
  bool thermostat = true;
  bool momentum_projection = true;
  std::uint64_t seed = 1;
  double t_end = 1.0;

  bool homogeneous() const { return cells == std::array<int, 3>{1, 1, 1}; }
  std::size_t cell_total() const {
    return static_cast<std::size_t>(cells[0]) * static_cast<std::size_t>(cells[1]) * static_cast<std::size_t>(cells[2]);
  }

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

inline void validate(const SimConfig& c) {
  if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) throw InputError("lambda must lie in [0, 1]");
  if (c.n_particles < 2) throw InputError("n_particles must be at least 2");
  for (int k : c.cells)
    if (k < 1) throw InputError("cell counts must be positive");
  if (c.dt && !(*c.dt > 0.0 && std::isfinite(*c.dt))) throw InputError("dt must be positive");
  if (!(c.t_end >= 0.0) || !std::isfinite(c.t_end)) throw InputError("t_end must be non-negative");
}

/// Heat-bath strength lambda^gamma, gamma from the restitution expansion.
inline double heat_strength(const SimConfig& c) {
  return std::pow(c.lambda, expansion_params(c.model).gamma);
}

/// Mean relative speed estimated over the deterministic pairs (i, i + N/2).
inline double mean_relative_speed(const ParticleEnsemble& ens) {
  const std::size_t n = ens.size();
  if (n < 2) return 0.0;
  const std::size_t half = n / 2;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += norm(ens.velocities[i] - ens.velocities[(i + half) % n]);
  return acc / static_cast<double>(n);
}

/// Mean time between collisions for one particle, 1 / (4 pi <|u|>) at unit density.
inline double mean_collision_time(const ParticleEnsemble& ens) {
  const double u = mean_relative_speed(ens);
  if (!(u > 0.0)) throw ConfigError("mean relative speed is zero; collision time undefined");
  return 1.0 / (4.0 * std::numbers::pi * u);
}

inline double auto_dt(const ParticleEnsemble& ens) { return 0.1 * mean_collision_time(ens); }

/// Particles bucketed by cell (counting sort), plus per-cell majorant speeds.
struct CellGrid {
  std::array<int, 3> counts{1, 1, 1};
  std::vector<std::uint32_t> cell_of;
  std::vector<std::size_t> cell_start;  // size cells + 1
  std::vector<std::uint32_t> order;
  std::vector<double> u_max;

  std::size_t cell_total() const {
    return static_cast<std::size_t>(counts[0]) * static_cast<std::size_t>(counts[1]) * static_cast<std::size_t>(counts[2]);
  }

  void rebuild(const ParticleEnsemble& ens) {
    const std::size_t n_cells = cell_total();
    cell_of.resize(ens.size());
    cell_start.assign(n_cells + 1, 0);
    for (std::size_t i = 0; i < ens.size(); ++i) {
      const Vec3& x = ens.positions[i];
      std::size_t idx[3];
      for (int d = 0; d < 3; ++d) {
        auto c = static_cast<std::size_t>(x[d] * counts[d]);
        idx[d] = std::min<std::size_t>(c, static_cast<std::size_t>(counts[d] - 1));
      }
      const auto cell = static_cast<std::uint32_t>((idx[0] * counts[1] + idx[1]) * counts[2] + idx[2]);
      cell_of[i] = cell;
      ++cell_start[cell + 1];
    }
    for (std::size_t c = 0; c < n_cells; ++c) cell_start[c + 1] += cell_start[c];
    order.resize(ens.size());
    std::vector<std::size_t> fill(cell_start.begin(), cell_start.end() - 1);
    for (std::size_t i = 0; i < ens.size(); ++i) order[fill[cell_of[i]]++] = static_cast<std::uint32_t>(i);
    u_max.assign(n_cells, 0.0);
  }
};

/// x <- (x + v dt) mod 1, componentwise.
inline void transport_step(ParticleEnsemble& ens, double dt) {
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  parallel_for(ens.size(), [&](std::size_t i) {
    Vec3& x = ens.positions[i];
    const Vec3& v = ens.velocities[i];
    for (int d = 0; d < 3; ++d) {
      double y = x[d] + v[d] * dt;
      y -= std::floor(y);
      if (y >= 1.0) y = 0.0;
      x[d] = y;
    }
  });
}

/// Brownian kicks v <- v + sqrt(2 lambda^gamma dt) xi. With momentum_projection
/// the mean kick is removed so total momentum is unchanged.
inline void thermostat_step(ParticleEnsemble& ens, double lambda, double gamma, double dt, bool momentum_projection,
                            std::uint64_t seed, std::uint64_t step) {
  if (!(lambda >= 0.0)) throw InputError("lambda must be non-negative");
  const double strength = std::pow(lambda, gamma);
  if (strength == 0.0 || ens.empty()) return;
  const double amplitude = std::sqrt(2.0 * strength * dt);
  std::vector<Vec3> kicks(ens.size());
  parallel_for(ens.size(), [&](std::size_t i) {
    RandomStream rng(seed, step, i, StreamTag::thermostat);
    kicks[i] = amplitude * rng.normal3();
  });
  Vec3 mean{};
  if (momentum_projection) {
    for (const auto& k : kicks) mean += k;
    mean *= 1.0 / static_cast<double>(kicks.size());
  }
  for (std::size_t i = 0; i < ens.size(); ++i) ens.velocities[i] += kicks[i] - mean;
}

struct CollisionStats {
  std::size_t candidates = 0;
  std::size_t collisions = 0;
  std::size_t majorant_overflows = 0;
  double energy_change = 0.0;  // sum over collisions of w * delta_energy
};

using CollisionObserver = std::function<void(const CollisionPair&, const Vec3& sigma, const CollisionOutcome&)>;

/// No-time-counter collision sampling, independently per cell. The majorant
/// 2 max_i |v_i - mean| bounds every pairwise |u| in the cell at step start.
/// An observer forces sequential cell processing.
inline CollisionStats collision_step(ParticleEnsemble& ens, CellGrid& grid, const RestitutionModel& model,
                                     double lambda, double dt, std::uint64_t seed, std::uint64_t step,
                                     const CollisionObserver& observer = {}) {
  const std::size_t n_cells = grid.cell_total();
  const double w = ens.particle_weight();
  const double cell_volume = 1.0 / static_cast<double>(n_cells);
  std::vector<CollisionStats> per_cell(n_cells);
  std::vector<char> overloaded(n_cells, 0);

  auto process = [&](std::size_t cell) {
    const std::size_t begin = grid.cell_start[cell];
    const std::size_t n = grid.cell_start[cell + 1] - begin;
    if (n < 2) return;
    const std::uint32_t* members = grid.order.data() + begin;
    Vec3 mean{};
    for (std::size_t a = 0; a < n; ++a) mean += ens.velocities[members[a]];
    mean *= 1.0 / static_cast<double>(n);
    double radius2 = 0.0;
    for (std::size_t a = 0; a < n; ++a) radius2 = std::max(radius2, norm2(ens.velocities[members[a]] - mean));
    double u_max = 2.0 * std::sqrt(radius2);
    grid.u_max[cell] = u_max;
    if (u_max == 0.0) return;

    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    const double expected = pairs * 4.0 * std::numbers::pi * u_max * w / cell_volume * dt;
    if (expected > 10.0 * pairs) {
      overloaded[cell] = 1;
      return;
    }
    RandomStream rng(seed, step, cell, StreamTag::collision);
    auto n_cand = static_cast<std::size_t>(expected);
    if (rng.uniform() < expected - static_cast<double>(n_cand)) ++n_cand;

    auto& stats = per_cell[cell];
    stats.candidates = n_cand;
    for (std::size_t c = 0; c < n_cand; ++c) {
      const std::size_t a = rng.below(n);
      std::size_t b = rng.below(n - 1);
      if (b >= a) ++b;
      Vec3& v = ens.velocities[members[a]];
      Vec3& v_star = ens.velocities[members[b]];
      const double speed = norm(v - v_star);
      const double accept = rng.uniform() * u_max;
      if (speed > u_max) {
        u_max = speed;
        grid.u_max[cell] = speed;
        ++stats.majorant_overflows;
      } else if (!(accept < speed)) {
        continue;
      }
      const Vec3 sigma = rng.unit_vector();
      const CollisionPair pair{v, v_star};
      const auto out = post_collision_sigma(pair, sigma, model, lambda);
      v = out.v_prime;
      v_star = out.v_star_prime;
      stats.energy_change += w * out.delta_energy;
      ++stats.collisions;
      if (observer) observer(pair, sigma, out);
    }
  };

  if (observer) {
    for (std::size_t c = 0; c < n_cells; ++c) process(c);
  } else {
    parallel_for(n_cells, process);
  }
  for (std::size_t c = 0; c < n_cells; ++c) {
    if (overloaded[c]) {
      std::ostringstream msg;
      msg << "collision candidates in cell " << c << " exceed 10x the pair count; use a smaller dt";
      throw ConfigError(msg.str());
    }
  }
  CollisionStats total;
  for (const auto& s : per_cell) {
    total.candidates += s.candidates;
    total.collisions += s.collisions;
    total.majorant_overflows += s.majorant_overflows;
    total.energy_change += s.energy_change;
  }
  return total;
}

/// Owns one simulation state. Every random number drawn in step k depends only
/// on (seed, k, cell or particle), so runs are reproducible across thread
/// counts and across checkpoint/resume.
class Simulation {
 public:
  Simulation(SimConfig config, ParticleEnsemble initial, std::uint64_t step = 0)
      : config_(std::move(config)), ensemble_(std::move(initial)), step_(step) {
    validate(config_);
    if (ensemble_.size() != config_.n_particles) throw InputError("ensemble size does not match n_particles");
    dt_ = config_.dt ? *config_.dt : auto_dt(ensemble_);
    config_.dt = dt_;
    gamma_ = expansion_params(config_.model).gamma;
    grid_.counts = config_.cells;
    ensemble_.time = static_cast<double>(step_) * dt_;
  }

  const SimConfig& config() const { return config_; }
  const ParticleEnsemble& ensemble() const { return ensemble_; }
  /// Direct access for perturbation experiments.
  ParticleEnsemble& mutable_ensemble() { return ensemble_; }
  double dt() const { return dt_; }
  double time() const { return ensemble_.time; }
  std::uint64_t step_index() const { return step_; }
  const CellGrid& grid() const { return grid_; }

  /// Switches the random streams (used for independent replicas).
  void reseed(std::uint64_t seed) { config_.seed = seed; }

  CollisionStats advance(const CollisionObserver& observer = {}) {
    const std::uint64_t k = step_ + 1;
    if (!config_.homogeneous()) transport_step(ensemble_, dt_);
    grid_.rebuild(ensemble_);
    auto stats = collision_step(ensemble_, grid_, config_.model, config_.lambda, dt_, config_.seed, k, observer);
    if (config_.thermostat)
      thermostat_step(ensemble_, config_.lambda, gamma_, dt_, config_.momentum_projection, config_.seed, k);
    step_ = k;
    ensemble_.time = static_cast<double>(step_) * dt_;
    return stats;
  }

  /// Number of whole steps needed to reach time t from the current step.
  std::uint64_t steps_until(double t) const {
    const double remaining = t / dt_ - static_cast<double>(step_);
    if (remaining <= 1e-9) return 0;
    return static_cast<std::uint64_t>(std::ceil(remaining - 1e-9));
  }

  void advance_to(double t) {
    for (std::uint64_t s = steps_until(t); s > 0; --s) advance();
  }

 private:
  SimConfig config_;
  ParticleEnsemble ensemble_;
  CellGrid grid_;
  std::uint64_t step_ = 0;
  double dt_ = 0.0;
  double gamma_ = 1.0;
};

struct ObservableSchedule {
  double moments_period = 0.0;  // 0: initial and final reports only
  std::vector<WaveVector> modes;
  bool dissipation = false;
  std::size_t dissipation_samples = 100'000;
  std::optional<double> tail_A;
  double tail_p = 1.5;

  friend bool operator==(const ObservableSchedule&, const ObservableSchedule&) = default;
};

/// Moments plus whatever the schedule asks for, at the simulation's current state.
inline MomentReport observe(const Simulation& sim, const ObservableSchedule& schedule, const PsiKernel* kernel) {
  auto report = moments(sim.ensemble());
  if (schedule.dissipation && kernel) {
    QuadratureSpec quad;
    quad.n_samples = schedule.dissipation_samples;
    quad.seed = derive_seed(sim.config().seed, sim.step_index(), 0, StreamTag::dissipation);
    report.dissipation = dissipation(sim.ensemble(), *kernel, quad);
  }
  for (const auto& k : schedule.modes) report.modes.push_back({k, spatial_mode(sim.ensemble(), k)});
  if (schedule.tail_A) report.tail_moment = stretched_tail_moment(sim.ensemble(), *schedule.tail_A, schedule.tail_p);
  return report;
}

inline std::uint64_t period_steps(double period, double dt) {
  if (!(period > 0.0)) return 0;
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(period / dt)));
}

struct RunResult {
  std::vector<MomentReport> trajectory;
  ParticleEnsemble final_state;
};

/// Advances `sim` to config.t_end, reporting every scheduled period (aligned to
/// absolute step numbers, so step 0 always reports) and at the end. `on_step`
/// runs after every step.
inline RunResult run(Simulation& sim, const ObservableSchedule& schedule,
                     const std::function<void(const Simulation&)>& on_step = {}) {
  std::optional<PsiKernel> kernel;
  if (schedule.dissipation) kernel.emplace(sim.config().model, sim.config().lambda);
  const PsiKernel* kp = kernel ? &*kernel : nullptr;
  const std::uint64_t every = period_steps(schedule.moments_period, sim.dt());
  RunResult result;
  const auto k0 = sim.step_index();
  if (k0 == 0 || (every && k0 % every == 0)) result.trajectory.push_back(observe(sim, schedule, kp));
  const std::uint64_t total = sim.steps_until(sim.config().t_end);
  for (std::uint64_t s = 0; s < total; ++s) {
    sim.advance();
    if (on_step) on_step(sim);
    const bool last = s + 1 == total;
    if (last || (every && sim.step_index() % every == 0)) result.trajectory.push_back(observe(sim, schedule, kp));
  }
  result.final_state = sim.ensemble();
  return result;
}

inline RunResult run(const SimConfig& config, const InitialCondition& init, const ObservableSchedule& schedule) {
  Simulation sim(config, init_ensemble(init, config.n_particles, config.seed));
  return run(sim, schedule);
}

}  // namespace granulite
