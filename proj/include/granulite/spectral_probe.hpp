// SPDX-License-Identifier: Apache-2.0
#pragma once

// Energy eigenvalue mu_lambda: first-order prediction from the elastic energy
// mode, and measurement by linear response of the particle solver.
//
// Energy balance of the homogeneous equation, with mass 1:
//   dE/dt = -(1/2) \iint f f_* psi_{e_lambda}(|u|^2) + 6 lambda^gamma.
// Dividing by lambda^gamma and letting lambda -> 0 around the Maxwellian
// M_theta gives the limit temperature: (1/2) E[zeta_0(|u|^2)] = 6 with
// u ~ Normal(0, 2 theta Id). Linearizing along the energy mode
// phi_0 = c (|v|^2 - 3 theta) M_theta gives
//   mu_lambda / lambda^gamma = -I_0(G_0, phi_0) / E(phi_0).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "granulite/collision_oracle.hpp"
#include "granulite/dsmc.hpp"
#include "granulite/ensemble.hpp"
#include "granulite/error.hpp"
#include "granulite/observables.hpp"
#include "granulite/restitution.hpp"

namespace granulite {

/// kappa' in (kappa' a / (4 + s)) m_{3+s}(theta) = 6; the 1/2 of the dissipation
/// functional times kappa.
inline constexpr double kBalanceConstant = 0.5 * kZetaLimitConstant;

/// E|u|^p for u ~ Normal(0, 2 theta Id) in three dimensions.
inline double relative_speed_moment(double p, double theta) {
  return std::pow(4.0 * theta, 0.5 * p) * std::tgamma(0.5 * (3.0 + p)) / std::tgamma(1.5);
}

/// Density of |u| for u ~ Normal(0, 2 theta Id).
inline double relative_speed_density(double r, double theta) {
  const double s2 = 2.0 * theta;
  return std::sqrt(2.0 / std::numbers::pi) * r * r / (s2 * std::sqrt(s2)) * std::exp(-0.5 * r * r / s2);
}

/// Maxwellian density with per-component variance theta at speed rho.
inline double maxwellian_density(double rho, double theta) {
  return std::exp(-0.5 * rho * rho / theta) / std::pow(2.0 * std::numbers::pi * theta, 1.5);
}

/// Root theta_bar of (kappa' a / (4 + s)) m_{3+s}(theta) = 6, by bisection in log theta.
inline double predict_theta_bar(const ExpansionParams& expansion) {
  if (!(expansion.a > 0.0) || !(expansion.gamma > 0.0)) throw InputError("expansion needs a > 0 and gamma > 0");
  const double s = expansion.speed_exponent;
  auto balance = [&](double theta) {
    return kBalanceConstant * expansion.a / (4.0 + s) * relative_speed_moment(3.0 + s, theta) - 6.0;
  };
  double lo = std::log(1e-12), hi = std::log(1e12);
  for (int it = 0; it < 400 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (balance(std::exp(mid)) > 0.0) hi = mid;
    else lo = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

/// Temperature at which a Maxwellian balances collisional loss against the heat
/// bath for the actual (model, lambda): (1/2) E[psi_{e_lambda}(|u|^2)] = 6 lambda^gamma.
inline double balance_temperature(const RestitutionModel& model, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw InputError("balance temperature needs lambda in (0, 1]");
  const PsiKernel kernel(model, lambda);
  const double target = 6.0 * std::pow(lambda, expansion_params(model).gamma);
  auto loss = [&](double theta) {
    const double top = 14.0 * std::sqrt(2.0 * theta);
    return 0.5 * integrate_adaptive([&](double r) { return relative_speed_density(r, theta) * kernel(r); }, 0.0, top,
                                    1e-11);
  };
  double lo = std::log(1e-8), hi = std::log(1e8);
  for (int it = 0; it < 200 && hi - lo > 1e-11; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (loss(std::exp(mid)) > target) hi = mid;
    else lo = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

/// phi_0(v) = c (|v|^2 - 3 theta) M_theta(v), normalized in L^1(<v>^2) with c > 0.
struct EnergyEigenfunction {
  double theta_bar = 1.0;
  double c = 1.0;

  double radial(double rho) const { return c * (rho * rho - 3.0 * theta_bar) * maxwellian_density(rho, theta_bar); }
  double operator()(const Vec3& v) const { return radial(norm(v)); }
};

namespace detail {

/// \int_0^inf 4 pi rho^2 h(rho) d rho, split at the sign change of phi_0.
template <typename H>
double radial_integral(H&& h, double theta) {
  const double node = std::sqrt(3.0 * theta);
  const double top = 16.0 * std::sqrt(theta);
  auto f = [&](double rho) { return 4.0 * std::numbers::pi * rho * rho * h(rho); };
  return integrate_adaptive(f, 0.0, node, 1e-12) + integrate_adaptive(f, node, top, 1e-12);
}

}  // namespace detail

inline EnergyEigenfunction make_energy_eigenfunction(double theta_bar) {
  if (!(theta_bar > 0.0)) throw InputError("theta_bar must be positive");
  EnergyEigenfunction phi{theta_bar, 1.0};
  const double norm_c1 = detail::radial_integral(
      [&](double rho) { return std::abs(phi.radial(rho)) * (1.0 + rho * rho); }, theta_bar);
  phi.c = 1.0 / norm_c1;
  return phi;
}

inline double mass_of(const EnergyEigenfunction& phi) {
  return detail::radial_integral([&](double rho) { return phi.radial(rho); }, phi.theta_bar);
}
inline double weighted_norm_of(const EnergyEigenfunction& phi) {
  return detail::radial_integral([&](double rho) { return std::abs(phi.radial(rho)) * (1.0 + rho * rho); },
                                 phi.theta_bar);
}
/// E(phi_0) = \int phi_0 |v|^2 dv.
inline double energy_of(const EnergyEigenfunction& phi) {
  return detail::radial_integral([&](double rho) { return phi.radial(rho) * rho * rho; }, phi.theta_bar);
}

/// Density of |v - v_*| for fixed |v| = rho and v_* ~ M_theta (non-central chi).
inline double offset_speed_density(double r, double rho, double theta) {
  const double base = r / std::sqrt(2.0 * std::numbers::pi * theta);
  if (rho < 1e-9) return base * 2.0 * r / theta * std::exp(-0.5 * r * r / theta);
  return base / rho * std::exp(-0.5 * (r - rho) * (r - rho) / theta) * -std::expm1(-2.0 * r * rho / theta);
}

/// I_0(G_0, phi_0) by nested radial quadrature over (|v|, |v - v_*|).
inline double I0_radial(const ExpansionParams& expansion, const EnergyEigenfunction& phi) {
  const double theta = phi.theta_bar;
  const double width = 14.0 * std::sqrt(theta);
  auto inner = [&](double rho) {
    auto f = [&](double r) { return offset_speed_density(r, rho, theta) * zeta_0(expansion, r * r); };
    const double lo = std::max(0.0, rho - width);
    return integrate_adaptive(f, lo, rho + width, 1e-12);
  };
  return detail::radial_integral([&](double rho) { return phi.radial(rho) * inner(rho); }, theta);
}

/// I_0(G_0, phi_0) through centre-of-mass coordinates: integrating out
/// V = (v + v_*)/2 leaves c E[(|u|^2/4 - 3 theta/2) zeta_0(|u|^2)] with
/// u ~ Normal(0, 2 theta Id); evaluated with exp-sinh on [0, inf).
inline double I0_relative(const ExpansionParams& expansion, const EnergyEigenfunction& phi) {
  const double theta = phi.theta_bar;
  boost::math::quadrature::exp_sinh<double> rule;
  auto f = [&](double r) {
    const double density = relative_speed_density(r, theta);
    if (density == 0.0) return 0.0;  // far tail; avoids 0 * inf
    return density * (0.25 * r * r - 1.5 * theta) * zeta_0(expansion, r * r);
  };
  return phi.c * rule.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-13);
}

/// mu_lambda ~ -lambda^gamma I_0(G_0, phi_0) / E(phi_0) at theta_bar.
inline double predict_mu_first_order(const ExpansionParams& expansion, double theta_bar, double lambda) {
  const auto phi = make_energy_eigenfunction(theta_bar);
  return -std::pow(lambda, expansion.gamma) * I0_radial(expansion, phi) / energy_of(phi);
}

struct SteadyOptions {
  std::optional<InitialCondition> init;  // default: Maxwellian at balance_temperature
  double window_collision_times = 20.0;  // minimum stationarity / averaging window
  double sample_collision_times = 0.5;
  double warmup_relaxation_times = 3.0;
  double max_time = 0.0;                 // 0: 60 windows
  std::size_t dissipation_samples = 20'000;
};

struct SteadyState {
  Simulation simulation;         // final state, ready to continue
  MomentReport mean_report{};    // time-averaged over the stationary window
  double theta_err = 0.0;
  double energy_err = 0.0;
  double energy_std = 0.0;       // standard deviation of the energy samples
  double collision_time = 0.0;   // mean collision time at the start of averaging
  double window_start = 0.0;
  double window_end = 0.0;
  std::vector<TimePoint> temperature{};  // all samples, warm-up included
};

namespace detail {

struct MeanError {
  double mean = 0.0;
  double error = 0.0;
  double stddev = 0.0;
};

/// Mean with a batch-means error (10 batches).
inline MeanError batch_means(std::span<const double> x) {
  MeanError out;
  const std::size_t n = x.size();
  if (n == 0) return out;
  for (double v : x) out.mean += v;
  out.mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - out.mean) * (v - out.mean);
  out.stddev = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
  const std::size_t batches = std::min<std::size_t>(10, n);
  const std::size_t per = n / batches;
  if (per == 0 || batches < 2) return out;
  std::vector<double> bm(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < per; ++i) bm[b] += x[b * per + i];
    bm[b] /= static_cast<double>(per);
  }
  double m = 0.0;
  for (double v : bm) m += v;
  m /= static_cast<double>(batches);
  double s = 0.0;
  for (double v : bm) s += (v - m) * (v - m);
  out.error = std::sqrt(s / static_cast<double>(batches - 1) / static_cast<double>(batches));
  return out;
}

/// Slope of y against t with a standard error inflated for lag-1 autocorrelation.
inline std::pair<double, double> trend(std::span<const TimePoint> pts) {
  const std::size_t n = pts.size();
  std::vector<double> t(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = pts[i].t;
    y[i] = pts[i].y;
  }
  const auto line = least_squares(t, y);
  double mt = 0.0;
  for (double v : t) mt += v;
  mt /= static_cast<double>(n);
  std::vector<double> res(n);
  double sxx = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    res[i] = y[i] - line.intercept - line.slope * t[i];
    sxx += (t[i] - mt) * (t[i] - mt);
    ss += res[i] * res[i];
  }
  double c1 = 0.0;
  for (std::size_t i = 1; i < n; ++i) c1 += res[i] * res[i - 1];
  const double rho = ss > 0.0 ? std::clamp(c1 / ss, 0.0, 0.95) : 0.0;
  const double inflation = (1.0 + rho) / (1.0 - rho);
  const double se = std::sqrt(ss / static_cast<double>(n - 2) / sxx * inflation);
  return {line.slope, se};
}

}  // namespace detail

/// Runs a homogeneous, thermostatted simulation until the temperature series
/// shows no trend at 2 sigma over a window of at least window_collision_times,
/// then averages over that window.
inline SteadyState steady_state(const SimConfig& config, const SteadyOptions& options = {}) {
  validate(config);
  if (!config.homogeneous()) throw InputError("steady_state needs a homogeneous cell grid");
  const bool conservative = config.lambda == 0.0 && !config.thermostat;
  if (!conservative && !(config.thermostat && config.lambda > 0.0))
    throw InputError("steady_state needs the thermostat on and lambda > 0");

  InitialCondition init = options.init
                              ? *options.init
                              : InitialCondition::maxwellian(conservative ? 1.0 : balance_temperature(config.model,
                                                                                                      config.lambda));
  Simulation sim(config, init_ensemble(init, config.n_particles, config.seed));
  const double tau = mean_collision_time(sim.ensemble());
  const auto expansion = expansion_params(config.model);
  const double theta0 = moments(sim.ensemble()).temperature;
  const double relax = conservative ? 0.0 : theta0 / ((3.0 + expansion.speed_exponent) * heat_strength(config));
  const double window = std::max(options.window_collision_times * tau, 2.0 * relax);
  const double sample = options.sample_collision_times * tau;
  const double warmup = std::max(options.window_collision_times * tau, options.warmup_relaxation_times * relax);
  const double budget = options.max_time > 0.0 ? options.max_time : warmup + 60.0 * window;

  const PsiKernel kernel(config.model, config.lambda);
  std::vector<TimePoint> temps;
  std::vector<double> energies, dissip;
  std::vector<double> times;
  auto record = [&] {
    const auto m = moments(sim.ensemble());
    temps.push_back({sim.time(), m.temperature});
    energies.push_back(m.energy);
    QuadratureSpec quad;
    quad.n_samples = options.dissipation_samples;
    quad.seed = derive_seed(config.seed, sim.step_index(), 1, StreamTag::dissipation);
    dissip.push_back(dissipation(sim.ensemble(), kernel, quad).value);
    times.push_back(sim.time());
  };

  const double t0 = sim.time();
  sim.advance_to(t0 + warmup);
  record();
  double next = sim.time();
  while (true) {
    next += sample;
    sim.advance_to(next);
    record();
    const double t_now = sim.time();
    if (t_now - t0 > budget)
      throw ConvergenceError("temperature not stationary after t = " + std::to_string(t_now - t0) +
                             " (last theta = " + std::to_string(temps.back().y) + ")");
    if (t_now - times.front() < window) continue;
    std::size_t first = 0;
    while (first + 1 < times.size() && t_now - times[first + 1] >= window) ++first;
    if (temps.size() - first < 8) continue;
    std::span<const TimePoint> win(temps.data() + first, temps.size() - first);
    const auto [slope, se] = detail::trend(win);
    if (std::abs(slope) > 2.0 * se && !conservative) continue;

    SteadyState out{sim};
    const auto th = detail::batch_means(std::span<const double>(energies).subspan(first));
    std::vector<double> tv;
    for (const auto& p : win) tv.push_back(p.y);
    const auto tt = detail::batch_means(tv);
    const auto dd = detail::batch_means(std::span<const double>(dissip).subspan(first));
    out.mean_report = moments(sim.ensemble());
    out.mean_report.time = t_now;
    out.mean_report.energy = th.mean;
    out.mean_report.temperature = tt.mean;
    out.mean_report.dissipation = DissipationEstimate{dd.mean, dd.error};
    out.theta_err = tt.error;
    out.energy_err = th.error;
    out.energy_std = th.stddev;
    out.collision_time = mean_collision_time(sim.ensemble());
    out.window_start = times[first];
    out.window_end = t_now;
    out.temperature = std::move(temps);
    return out;
  }
}

struct MuOptions {
  double delta = 0.1;
  std::size_t replicas = 8;
  double horizon = 4.0;                  // run length in units of 1 / |mu guess|
  double fit_start_collision_times = 2.0;
  std::size_t samples = 300;             // energy samples per replica
  double min_r_squared = 0.8;
};

struct MuEstimate {
  double lambda = 0.0;
  double mu_measured = 0.0;
  double mu_err = 0.0;
  double mu_predicted = 0.0;
  double gamma_used = 0.0;
  double theta_inf = 0.0;
  double theta_bar = 0.0;
  std::size_t n_particles = 0;
  double t_end = 0.0;
  std::uint64_t seed = 0;
  double delta = 0.0;
  SpectralFit fit;
  std::vector<TimePoint> excess_energy;  // replica-averaged E(t) - E_twin(t), t from the perturbation
};

namespace detail {

inline std::vector<TimePoint> excess_curve(const std::vector<std::vector<double>>& runs, const std::vector<double>& t,
                                           std::size_t skip) {
  std::vector<TimePoint> out(t.size());
  const double count = static_cast<double>(runs.size() - (skip < runs.size() ? 1 : 0));
  for (std::size_t i = 0; i < t.size(); ++i) {
    double acc = 0.0;
    for (std::size_t r = 0; r < runs.size(); ++r)
      if (r != skip) acc += runs[r][i];
    out[i] = {t[i], acc / count};
  }
  return out;
}

}  // namespace detail

/// Linear response of the energy: replicas start from decorrelated snapshots of
/// the steady state with all velocities scaled by sqrt(1 + delta) about the
/// mean; the decay rate of the replica-averaged energy excess is the energy
/// eigenvalue. Error by delete-one-replica jackknife.
inline MuEstimate measure_mu(const SteadyState& steady, const MuOptions& options = {}) {
  if (!(options.delta > 0.0 && options.delta <= 0.2)) throw InputError("perturbation delta must lie in (0, 0.2]");
  if (options.replicas < 2) throw InputError("measure_mu needs at least two replicas");
  const SimConfig& config = steady.simulation.config();
  const auto expansion = expansion_params(config.model);
  const double theta_inf = steady.mean_report.temperature;

  MuEstimate est;
  est.lambda = config.lambda;
  est.gamma_used = expansion.gamma;
  est.theta_inf = theta_inf;
  est.theta_bar = predict_theta_bar(expansion);
  est.mu_predicted = predict_mu_first_order(expansion, est.theta_bar, config.lambda);
  est.n_particles = config.n_particles;
  est.seed = config.seed;
  est.delta = options.delta;

  const double strength = heat_strength(config);
  const double mu_guess = (3.0 + expansion.speed_exponent) * strength / std::max(theta_inf, 1e-300);
  const double run_time = mu_guess > 0.0 ? options.horizon / mu_guess : 200.0 * steady.collision_time;
  const double dt = steady.simulation.dt();
  const std::uint64_t total_steps = std::max<std::uint64_t>(1, std::llround(run_time / dt));
  const std::uint64_t every = std::max<std::uint64_t>(1, total_steps / options.samples);
  est.t_end = static_cast<double>(total_steps) * dt;

  // Each replica starts from its own snapshot of the stationary run, one
  // relaxation time after the previous one, and runs a perturbed copy next to
  // an unperturbed twin on the same random streams; E_twin(t) stands in for
  // E_inf and cancels the shared noise.
  std::vector<std::vector<double>> excess(options.replicas);
  std::vector<double> times;
  Simulation base = steady.simulation;
  const double gap = mu_guess > 0.0 ? 1.0 / mu_guess : 20.0 * steady.collision_time;
  for (std::size_t r = 0; r < options.replicas; ++r) {
    if (r > 0) base.advance_to(base.time() + gap);
    Simulation twin = base;
    twin.reseed(derive_seed(config.seed, r, 0, StreamTag::replica));
    Simulation sim = twin;
    auto& ens = sim.mutable_ensemble();
    Vec3 mean{};
    for (const auto& v : ens.velocities) mean += v;
    mean *= 1.0 / static_cast<double>(ens.size());
    const double scale = std::sqrt(1.0 + options.delta);
    for (auto& v : ens.velocities) v = mean + scale * (v - mean);
    const double start = sim.time();
    for (std::uint64_t s = 0; s <= total_steps; ++s) {
      if (s > 0) {
        sim.advance();
        twin.advance();
      }
      if (s % every == 0) {
        excess[r].push_back(moments(sim.ensemble()).energy - moments(twin.ensemble()).energy);
        if (r == 0) times.push_back(sim.time() - start);
      }
    }
  }

  const auto curve = detail::excess_curve(excess, times, options.replicas);
  est.excess_energy = curve;
  // Noise floor: the replica spread of the excess at each time (it grows as
  // the twins decorrelate), but never below the stationary fluctuation level.
  const double floor = steady.energy_std / std::sqrt(static_cast<double>(options.replicas));
  const double t_fit = options.fit_start_collision_times * steady.collision_time;
  const double rr = static_cast<double>(options.replicas);
  double t_stop = curve.back().t;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i].t < t_fit) continue;
    double var = 0.0;
    for (const auto& run : excess) var += (run[i] - curve[i].y) * (run[i] - curve[i].y);
    const double se = std::max(floor, std::sqrt(var / (rr - 1.0) / rr));
    if (curve[i].y < 3.0 * se) {
      t_stop = i > 0 ? curve[i - 1].t : curve[i].t;
      break;
    }
  }
  est.fit = fit_exponential_rate(curve, t_fit, t_stop);
  est.mu_measured = est.fit.rate;

  std::vector<double> loo;
  for (std::size_t r = 0; r < options.replicas; ++r) {
    const auto c = detail::excess_curve(excess, times, r);
    try {
      loo.push_back(fit_exponential_rate(c, t_fit, t_stop).rate);
    } catch (const InputError&) {
      loo.push_back(fit_exponential_rate(c, t_fit, noise_floor_cutoff(c, t_fit, 0.0)).rate);
    }
  }
  double m = 0.0;
  for (double x : loo) m += x;
  m /= static_cast<double>(loo.size());
  double s = 0.0;
  for (double x : loo) s += (x - m) * (x - m);
  const double k = static_cast<double>(loo.size());
  est.mu_err = std::sqrt(s * (k - 1.0) / k);

  if (est.fit.r_squared < options.min_r_squared)
    throw QualityError("energy decay fit r^2 = " + std::to_string(est.fit.r_squared) +
                       " below threshold; run longer or with more particles");
  return est;
}

struct ScalingFit {
  double gamma_hat = 0.0;
  double C_hat = 0.0;
  double r_squared = 0.0;
};

/// log |mu| = log C + gamma log lambda by least squares.
inline ScalingFit scaling_fit(std::span<const MuEstimate> estimates) {
  std::set<double> distinct;
  std::vector<double> x, y;
  for (const auto& e : estimates) {
    if (!(e.mu_measured < 0.0)) throw InputError("scaling fit needs every measured mu to be negative");
    if (!(e.lambda > 0.0)) throw InputError("scaling fit needs lambda > 0");
    distinct.insert(e.lambda);
    x.push_back(std::log(e.lambda));
    y.push_back(std::log(-e.mu_measured));
  }
  if (distinct.size() < 4) throw InputError("scaling fit needs at least 4 distinct lambda values");
  const auto line = detail::least_squares(x, y);
  double my = 0.0;
  for (double v : y) my += v;
  my /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - line.intercept - line.slope * x[i];
    ss_res += r * r;
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  return {line.slope, std::exp(line.intercept), ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0};
}

struct HaffFit {
  double p = 0.0;
  double t0 = 0.0;
  double T0 = 0.0;
  double r_squared = 0.0;
  bool monotone = false;  // every sampled temperature below the previous one
  std::vector<TimePoint> temperature;
};

/// Fits T(t) = T0 (1 + t/t0)^{-p}: linear least squares in (log T0, p) for each
/// t0, golden-section search over log t0.
inline HaffFit fit_haff(std::span<const TimePoint> series) {
  if (series.size() < 5) throw InputError("Haff fit needs at least 5 points");
  std::vector<double> ly;
  for (const auto& p : series) {
    if (!(p.y > 0.0)) throw InputError("Haff fit needs positive temperatures");
    ly.push_back(std::log(p.y));
  }
  const double span_t = series.back().t - series.front().t;
  if (!(span_t > 0.0)) throw InputError("Haff fit needs increasing times");
  struct Trial {
    double sse, p, logT0;
  };
  auto solve = [&](double log_t0) {
    const double t0 = std::exp(log_t0);
    std::vector<double> x(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) x[i] = std::log1p((series[i].t - series.front().t) / t0);
    const auto line = detail::least_squares(x, ly);
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = ly[i] - line.intercept - line.slope * x[i];
      sse += r * r;
    }
    return Trial{sse, -line.slope, line.intercept};
  };
  double best_lt = 0.0, best_sse = std::numeric_limits<double>::infinity();
  for (int k = -60; k <= 60; ++k) {
    const double lt = std::log(span_t) + 0.2 * k;
    const double sse = solve(lt).sse;
    if (sse < best_sse) {
      best_sse = sse;
      best_lt = lt;
    }
  }
  double a = best_lt - 0.2, b = best_lt + 0.2;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 100; ++it) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (solve(c).sse < solve(d).sse) b = d;
    else a = c;
  }
  const double lt = 0.5 * (a + b);
  const auto best = solve(lt);
  double my = 0.0;
  for (double v : ly) my += v;
  my /= static_cast<double>(ly.size());
  double ss_tot = 0.0;
  for (double v : ly) ss_tot += (v - my) * (v - my);
  HaffFit fit;
  fit.p = best.p;
  fit.t0 = std::exp(lt);
  fit.T0 = std::exp(best.logT0);
  fit.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - best.sse / ss_tot, 0.0, 1.0) : 1.0;
  fit.monotone = true;
  for (std::size_t i = 1; i < series.size(); ++i)
    if (!(series[i].y < series[i - 1].y)) fit.monotone = false;
  fit.temperature.assign(series.begin(), series.end());
  return fit;
}

/// Free cooling (thermostat off): samples T(t) every `sample_steps` steps up to
/// config.t_end and fits the algebraic cooling law.
inline HaffFit haff_cooling_probe(const SimConfig& config, const InitialCondition& init,
                                  std::uint64_t sample_steps = 10) {
  if (config.thermostat) throw InputError("haff_cooling_probe needs the thermostat off");
  Simulation sim(config, init_ensemble(init, config.n_particles, config.seed));
  std::vector<TimePoint> series{{sim.time(), moments(sim.ensemble()).temperature}};
  const std::uint64_t total = sim.steps_until(config.t_end);
  for (std::uint64_t s = 1; s <= total; ++s) {
    sim.advance();
    if (s % sample_steps == 0 || s == total) series.push_back({sim.time(), moments(sim.ensemble()).temperature});
  }
  return fit_haff(series);
}

}  // namespace granulite
