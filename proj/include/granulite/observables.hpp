// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "granulite/collision_oracle.hpp"
#include "granulite/ensemble.hpp"
#include "granulite/error.hpp"
#include "granulite/vec3.hpp"

namespace granulite {

struct ModeAmplitude {
  WaveVector k{};
  std::complex<double> amplitude;
};

struct MomentReport {
  double time = 0.0;
  double mass = 0.0;
  Vec3 momentum;
  double energy = 0.0;       // sum_i w |v_i|^2
  double temperature = 0.0;  // (energy - |momentum|^2) / 3
  std::optional<DissipationEstimate> dissipation;
  std::vector<ModeAmplitude> modes;
  std::optional<double> tail_moment;
};

inline MomentReport moments(const ParticleEnsemble& ens) {
  MomentReport r;
  r.time = ens.time;
  const double w = ens.particle_weight();
  double energy = 0.0;
  Vec3 p{};
  for (const auto& v : ens.velocities) {
    p += v;
    energy += norm2(v);
  }
  r.mass = w * static_cast<double>(ens.size());
  r.momentum = w * p;
  r.energy = w * energy;
  r.temperature = std::max(0.0, (r.energy - norm2(r.momentum)) / 3.0);
  return r;
}

/// log of the weighted mean of exp(A |v|^p), evaluated with log-sum-exp.
inline double log_stretched_tail_moment(const ParticleEnsemble& ens, double A, double p = 1.5) {
  if (!(A > 0.0)) throw InputError("tail moment needs A > 0");
  if (ens.empty()) throw InputError("tail moment needs a non-empty ensemble");
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& v : ens.velocities) peak = std::max(peak, A * std::pow(norm(v), p));
  double acc = 0.0;
  for (const auto& v : ens.velocities) acc += std::exp(A * std::pow(norm(v), p) - peak);
  return peak + std::log(acc * ens.particle_weight());
}

/// Weighted mean of exp(A |v|^p); +inf when the moment itself overflows.
inline double stretched_tail_moment(const ParticleEnsemble& ens, double A, double p = 1.5) {
  return std::exp(log_stretched_tail_moment(ens, A, p));
}

enum class ModeField { density, energy };

/// Weighted average of exp(-2 pi i k.x), times |v|^2 for the energy field.
inline std::complex<double> spatial_mode(const ParticleEnsemble& ens, const WaveVector& k,
                                         ModeField field = ModeField::density, bool allow_zero = false) {
  if (!allow_zero && k == WaveVector{0, 0, 0}) throw InputError("spatial mode needs k != 0");
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const Vec3& x = ens.positions[i];
    const double phase = -2.0 * std::numbers::pi * (k[0] * x.x + k[1] * x.y + k[2] * x.z);
    const double weight = field == ModeField::energy ? norm2(ens.velocities[i]) : 1.0;
    re += weight * std::cos(phase);
    im += weight * std::sin(phase);
  }
  const double w = ens.particle_weight();
  return {w * re, w * im};
}

namespace detail {

/// CDF of the speed |v| for a Maxwellian with per-component variance theta.
inline double maxwell_speed_cdf(double s, double theta) {
  const double x = s / std::sqrt(theta);
  return std::erf(x / std::numbers::sqrt2) - std::sqrt(2.0 / std::numbers::pi) * x * std::exp(-0.5 * x * x);
}

}  // namespace detail

/// L1 distance in [0, 2] between the 64-bin speed histogram (range [0, max speed])
/// and the Maxwell speed law at the fitted temperature.
inline double maxwellian_distance(const ParticleEnsemble& ens) {
  if (ens.size() < 1000) throw InputError("maxwellian_distance needs at least 1000 particles");
  constexpr std::size_t kBins = 64;
  const auto rep = moments(ens);
  if (!(rep.temperature > 0.0)) return 2.0;
  std::vector<double> speeds(ens.size());
  double top = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    speeds[i] = norm(ens.velocities[i] - rep.momentum);
    top = std::max(top, speeds[i]);
  }
  std::vector<double> counts(kBins, 0.0);
  for (double s : speeds) {
    auto b = static_cast<std::size_t>(s / top * kBins);
    counts[std::min(b, kBins - 1)] += 1.0;
  }
  const double n = static_cast<double>(ens.size());
  double dist = 0.0;
  double prev = 0.0;
  for (std::size_t b = 0; b < kBins; ++b) {
    const double edge = top * static_cast<double>(b + 1) / kBins;
    const double cdf = detail::maxwell_speed_cdf(edge, rep.temperature);
    dist += std::abs(counts[b] / n - (cdf - prev));
    prev = cdf;
  }
  return dist + (1.0 - prev);
}

struct TimePoint {
  double t = 0.0;
  double y = 0.0;
};

struct SpectralFit {
  double rate = 0.0;  // slope of log y against t; negative means decay
  double intercept = 0.0;
  double r_squared = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t points = 0;
};

/// Least-squares fit of log y = intercept + rate t over t in [t_start, t_end].
inline SpectralFit fit_exponential_rate(std::span<const TimePoint> series, double t_start, double t_end) {
  if (!(t_end > t_start)) throw InputError("fit window needs t_end > t_start");
  std::vector<double> ts, ls;
  for (const auto& p : series) {
    if (p.t < t_start || p.t > t_end) continue;
    if (!(p.y > 0.0)) throw InputError("non-positive value inside the fit window; clip at the noise floor first");
    ts.push_back(p.t);
    ls.push_back(std::log(p.y));
  }
  if (ts.size() < 5) throw InputError("fit window needs at least 5 points");
  const auto line = detail::least_squares(ts, ls);
  double mean = 0.0;
  for (double l : ls) mean += l;
  mean /= static_cast<double>(ls.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double pred = line.intercept + line.slope * ts[i];
    ss_res += (ls[i] - pred) * (ls[i] - pred);
    ss_tot += (ls[i] - mean) * (ls[i] - mean);
  }
  SpectralFit fit;
  fit.rate = line.slope;
  fit.intercept = line.intercept;
  // A series that is flat to round-off is a perfect fit of rate 0.
  const double flat = 1e-24 * static_cast<double>(ls.size()) * (1.0 + mean * mean);
  fit.r_squared = ss_tot > flat ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
  fit.t_start = t_start;
  fit.t_end = t_end;
  fit.points = ts.size();
  return fit;
}

/// End of the usable window: the last time before y first drops below 3 x floor.
inline double noise_floor_cutoff(std::span<const TimePoint> series, double t_start, double floor) {
  double last = t_start;
  for (const auto& p : series) {
    if (p.t < t_start) continue;
    if (p.y < 3.0 * floor) break;
    last = p.t;
  }
  return last;
}

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline constexpr const char* kMomentCsvHeader = "t,mass,px,py,pz,E,theta,D,D_err,|rho_k|,tail";

/// One CSV row in kMomentCsvHeader order; |rho_k| is the first scheduled mode.
inline std::string to_csv_row(const MomentReport& r) {
  using detail::format_double;
  std::string row = format_double(r.time) + ',' + format_double(r.mass) + ',' + format_double(r.momentum.x) + ',' +
                    format_double(r.momentum.y) + ',' + format_double(r.momentum.z) + ',' + format_double(r.energy) +
                    ',' + format_double(r.temperature) + ',';
  if (r.dissipation) row += format_double(r.dissipation->value) + ',' + format_double(r.dissipation->std_error);
  else row += ',';
  row += ',';
  if (!r.modes.empty()) row += format_double(std::abs(r.modes.front().amplitude));
  row += ',';
  if (r.tail_moment) row += format_double(*r.tail_moment);
  return row;
}

}  // namespace granulite
