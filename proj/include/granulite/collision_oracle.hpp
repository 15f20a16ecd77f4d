// SPDX-License-Identifier: Apache-2.0
#pragma once

// Monte-Carlo and quadrature evaluation of the weak-form collision operator
// and of the energy-dissipation kernels.
//
// For a pair with relative speed |u| the sphere average of the energy loss
// reduces (polar coordinates about u_hat, y = sin of half the deflection) to
//
//   psi_e(|u|^2) = 4 pi |u|^3 \int_0^1 (1 - e^2(|u| y)) y^3 dy,
//
// so that \int Q(f,f) |v|^2 dv = -(1/2) \iint f f_* psi_{e_lambda}(|u|^2).
// See docs/derivations.md for the small-lambda limit of zeta.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "granulite/ensemble.hpp"
#include "granulite/error.hpp"
#include "granulite/kinematics.hpp"
#include "granulite/parallel.hpp"
#include "granulite/restitution.hpp"
#include "granulite/rng.hpp"

namespace granulite {

/// Limit constant kappa in zeta_0(r^2) = kappa a / (4 + s) r^{3+s}: substituting
/// 1 - e^2(x) ~ 2 a x^s into psi_e gives 4 pi * 2 a / (4 + s).
inline constexpr double kZetaLimitConstant = 8.0 * std::numbers::pi;

struct QuadratureSpec {
  enum class Method { monte_carlo, gauss_1d };
  std::size_t n_samples = 1'000'000;
  std::uint64_t seed = 0;
  Method method = Method::monte_carlo;
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Energy dissipated per unit time, (1/2) \iint f f_* psi_{e_lambda}(|u|^2).
using DissipationEstimate = Estimate;

using TestFunction = std::function<double(const Vec3&)>;

/// Adaptive Gauss-Kronrod (7/15) on [a, b] to relative tolerance rel_tol.
template <typename F>
double integrate_adaptive(F&& f, double a, double b, double rel_tol = 1e-10) {
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(std::forward<F>(f), a, b, 20, rel_tol);
}

/// 4 pi \int_0^1 (1 - e_lambda^2(speed z)) z^3 dz, so psi = speed^3 times this.
inline double deficit_moment(const RestitutionModel& model, double lambda, double speed) {
  if (model.is_constant()) {
    const double e0 = eval_scaled(model, lambda, speed);
    return std::numbers::pi * (1.0 - e0 * e0);
  }
  if (speed == 0.0 || lambda == 0.0) return 0.0;
  // The capped law integrates in closed form: 1 - e^2 = d (2 - d) with
  // d = a x^g below the cap and d = 1 - e_min above it.
  if (const auto* cap = std::get_if<CappedPowerLaw>(&model.law())) {
    const double x = lambda * speed;
    const double g = cap->gamma;
    const double top = 1.0 - cap->e_min;
    const double z_cap = std::min(1.0, std::pow(top / cap->a, 1.0 / g) / x);
    const double ax = cap->a * std::pow(x, g);
    const double below = 2.0 * ax * std::pow(z_cap, 4.0 + g) / (4.0 + g) -
                         ax * ax * std::pow(z_cap, 4.0 + 2.0 * g) / (4.0 + 2.0 * g);
    const double above = top * (2.0 - top) * (1.0 - std::pow(z_cap, 4.0)) / 4.0;
    return 4.0 * std::numbers::pi * (below + above);
  }
  auto integrand = [&](double z) {
    const double d = deficit_scaled(model, lambda, speed * z);
    return d * (2.0 - d) * z * z * z;
  };
  return 4.0 * std::numbers::pi * integrate_adaptive(integrand, 0.0, 1.0);
}

/// psi_{e_lambda}(r) = 4 pi r^{3/2} \int_0^1 (1 - e_lambda^2(sqrt(r) z)) z^3 dz, by
/// adaptive quadrature (the constant law goes through the same path; the capped
/// law uses its closed form).
inline double psi_e(const RestitutionModel& model, double lambda, double r) {
  if (!std::isfinite(r) || r < 0.0) throw InputError("psi_e needs r >= 0");
  if (r == 0.0) return 0.0;
  const double speed = std::sqrt(r);
  if (model.is_constant()) {
    const double e0 = eval_scaled(model, lambda, speed);
    auto integrand = [&](double z) { return (1.0 - e0 * e0) * z * z * z; };
    return 4.0 * std::numbers::pi * r * speed * integrate_adaptive(integrand, 0.0, 1.0);
  }
  return r * speed * deficit_moment(model, lambda, speed);
}

/// psi_{e_lambda}(|u|^2) as a function of |u|, for per-pair use in estimators.
/// Cubic B-spline in log speed for the viscoelastic law; exact otherwise.
class PsiKernel {
 public:
  PsiKernel(const RestitutionModel& model, double lambda) : model_(model), lambda_(lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("lambda must lie in [0, 1]");
    if (model.is_constant()) {
      const double e0 = std::get<ConstantLaw>(model.law()).e0;
      constant_ = std::numbers::pi * (1.0 - e0 * e0);
      return;
    }
    if (lambda == 0.0) {
      constant_ = 0.0;
      return;
    }
    if (std::holds_alternative<CappedPowerLaw>(model.law())) {
      closed_form_ = true;
      return;
    }
    tabulated_ = true;
    exponent_ = expansion_params(model).speed_exponent;
    std::vector<double> values(kNodes);
    for (std::size_t i = 0; i < kNodes; ++i) {
      values[i] = deficit_moment(model, 1.0, std::exp(kLogMin + kStep * static_cast<double>(i)));
    }
    low_value_ = values.front();
    spline_ = std::make_shared<Spline>(values.data(), values.size(), kLogMin, kStep);
  }

  /// Deficit moment at relative speed `speed` (before the speed^3 factor).
  double moment(double speed) const {
    if (closed_form_) return deficit_moment(model_, lambda_, speed);
    if (!tabulated_) return constant_;
    const double s = lambda_ * speed;
    if (s <= 0.0) return 0.0;
    const double t = std::log(s);
    if (t < kLogMin) return low_value_ * std::exp(exponent_ * (t - kLogMin));
    if (t > kLogMax) return deficit_moment(model_, 1.0, s);
    return (*spline_)(t);
  }

  double operator()(double speed) const { return speed * speed * speed * moment(speed); }

 private:
  using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;
  static constexpr std::size_t kNodes = 2049;
  static constexpr double kLogMin = -36.8413614879047;  // ln 1e-16
  static constexpr double kLogMax = 18.420680743952367;  // ln 1e8
  static constexpr double kStep = (kLogMax - kLogMin) / (kNodes - 1);

  RestitutionModel model_;
  double lambda_ = 0.0;
  bool tabulated_ = false;
  bool closed_form_ = false;
  double constant_ = 0.0;
  double exponent_ = 0.0;
  double low_value_ = 0.0;
  std::shared_ptr<const Spline> spline_;
};

namespace detail {

struct ShardPlan {
  std::size_t shard_size;
  std::size_t shards;
};

inline ShardPlan plan_shards(std::size_t n) {
  const std::size_t size = std::clamp<std::size_t>((n + 15) / 16, 1, std::size_t{1} << 15);
  return {size, (n + size - 1) / size};
}

struct ShardSums {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;
};

/// Delete-one-shard jackknife standard error of the overall mean.
inline Estimate jackknife(const std::vector<ShardSums>& shards) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : shards) {
    total += s.sum;
    n += s.count;
  }
  Estimate est{n ? total / static_cast<double>(n) : 0.0, 0.0};
  const std::size_t k = shards.size();
  if (k < 2) return est;
  std::vector<double> loo(k);
  double loo_mean = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    loo[i] = (total - shards[i].sum) / static_cast<double>(n - shards[i].count);
    loo_mean += loo[i];
  }
  loo_mean /= static_cast<double>(k);
  double acc = 0.0;
  for (double x : loo) acc += (x - loo_mean) * (x - loo_mean);
  est.std_error = std::sqrt(acc * static_cast<double>(k - 1) / static_cast<double>(k));
  return est;
}

inline Estimate iid_mean(const std::vector<ShardSums>& shards) {
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (const auto& s : shards) {
    sum += s.sum;
    sum_sq += s.sum_sq;
    n += s.count;
  }
  const double mean = sum / static_cast<double>(n);
  if (n < 2) return {mean, 0.0};
  const double var = std::max(0.0, (sum_sq - sum * mean) / static_cast<double>(n - 1));
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace detail

/// Unbiased Monte-Carlo estimate of \int Q_{e_lambda}(g, f) psi dv: v_* from g,
/// v from f, sigma uniform (the 4 pi carries the sphere measure).
inline Estimate weak_Q(const ParticleEnsemble& g, const ParticleEnsemble& f, const TestFunction& psi,
                       const RestitutionModel& model, double lambda, const QuadratureSpec& quad = {}) {
  if (g.empty() || f.empty()) throw InputError("weak_Q needs non-empty ensembles");
  if (quad.n_samples < 1) throw InputError("n_samples must be positive");
  const auto plan = detail::plan_shards(quad.n_samples);
  std::vector<detail::ShardSums> sums(plan.shards);
  parallel_for(plan.shards, [&](std::size_t shard) {
    RandomStream rng(quad.seed, shard, 0, StreamTag::oracle);
    const std::size_t begin = shard * plan.shard_size;
    const std::size_t count = std::min(plan.shard_size, quad.n_samples - begin);
    auto& acc = sums[shard];
    for (std::size_t s = 0; s < count; ++s) {
      const Vec3& v_star = g.velocities[rng.below(g.size())];
      const Vec3& v = f.velocities[rng.below(f.size())];
      const Vec3 sigma = rng.unit_vector();
      double term = 0.0;
      const double speed = norm(v - v_star);
      if (speed > 0.0) {
        const auto out = post_collision_sigma({v, v_star}, sigma, model, lambda);
        term = 4.0 * std::numbers::pi * speed * (psi(out.v_prime) - psi(v));
      }
      acc.sum += term;
      acc.sum_sq += term * term;
    }
    acc.count = count;
  });
  return detail::iid_mean(sums);
}

/// L(g)(v) = 4 pi \int |v - v_*| g(v_*) dv_*, the collision frequency at v.
inline double loss_operator(const ParticleEnsemble& g, const Vec3& v) {
  if (g.empty()) throw InputError("loss_operator needs a non-empty ensemble");
  double acc = 0.0;
  for (const auto& w : g.velocities) acc += norm(v - w);
  return 4.0 * std::numbers::pi * acc * g.particle_weight();
}

/// U-statistic over sampled unordered pairs i != j of (1/2) psi_{e_lambda}(|u|^2),
/// with a delete-one-shard jackknife error.
inline DissipationEstimate dissipation(const ParticleEnsemble& f, const PsiKernel& kernel,
                                       const QuadratureSpec& quad = {}) {
  if (f.size() < 2) throw InputError("dissipation needs at least two particles");
  if (quad.n_samples < 1) throw InputError("n_samples must be positive");
  const auto plan = detail::plan_shards(quad.n_samples);
  std::vector<detail::ShardSums> sums(plan.shards);
  const std::size_t n = f.size();
  parallel_for(plan.shards, [&](std::size_t shard) {
    RandomStream rng(quad.seed, shard, 0, StreamTag::dissipation);
    const std::size_t begin = shard * plan.shard_size;
    const std::size_t count = std::min(plan.shard_size, quad.n_samples - begin);
    auto& acc = sums[shard];
    for (std::size_t s = 0; s < count; ++s) {
      const std::size_t i = rng.below(n);
      std::size_t j = rng.below(n - 1);
      if (j >= i) ++j;
      const double term = 0.5 * kernel(norm(f.velocities[i] - f.velocities[j]));
      acc.sum += term;
      acc.sum_sq += term * term;
    }
    acc.count = count;
  });
  return detail::jackknife(sums);
}

inline DissipationEstimate dissipation(const ParticleEnsemble& f, const RestitutionModel& model, double lambda,
                                       const QuadratureSpec& quad = {}) {
  return dissipation(f, PsiKernel(model, lambda), quad);
}

/// zeta_lambda(r^2) = psi_{e_lambda}(r^2) / lambda^gamma; for rescaled laws this is
/// psi_e(lambda^2 r^2) / lambda^{3+gamma} with the unscaled e.
inline double zeta(const RestitutionModel& model, double lambda, double r_squared) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw InputError("zeta needs lambda in (0, 1]");
  if (!(r_squared >= 0.0)) throw InputError("zeta needs r^2 >= 0");
  const double gamma = expansion_params(model).gamma;
  return psi_e(model, lambda, r_squared) / std::pow(lambda, gamma);
}

/// Small-lambda limit of zeta: kappa a / (4 + s) r^{3+s} with kappa = 8 pi.
inline double zeta_0(const ExpansionParams& expansion, double r_squared) {
  if (!(r_squared >= 0.0)) throw InputError("zeta_0 needs r^2 >= 0");
  const double s = expansion.speed_exponent;
  return kZetaLimitConstant * expansion.a / (4.0 + s) * std::pow(r_squared, 0.5 * (3.0 + s));
}

/// Cell-centred cubic velocity grid [-half_width, half_width]^3.
struct VelocityGrid {
  double half_width = 6.0;
  std::size_t points_per_axis = 48;
};

/// I(f, g) = \iint f(v_*) g(v) zeta(|v - v_*|^2): v_* averaged over (up to
/// max_particles of) the ensemble, v summed on a deterministic grid.
inline double I_functional(const ParticleEnsemble& f, const std::function<double(const Vec3&)>& g,
                           const std::function<double(double)>& zeta_fn, const VelocityGrid& grid = {},
                           std::size_t max_particles = 2000) {
  if (f.empty()) throw InputError("I_functional needs a non-empty ensemble");
  if (grid.points_per_axis < 1 || !(grid.half_width > 0.0)) throw InputError("invalid velocity grid");
  const std::size_t m = grid.points_per_axis;
  const double h = 2.0 * grid.half_width / static_cast<double>(m);
  const double cell_volume = h * h * h;
  std::vector<Vec3> nodes;
  std::vector<double> weights;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t k = 0; k < m; ++k) {
        const Vec3 v{-grid.half_width + (i + 0.5) * h, -grid.half_width + (j + 0.5) * h,
                     -grid.half_width + (k + 0.5) * h};
        const double gv = g(v);
        if (gv != 0.0) {
          nodes.push_back(v);
          weights.push_back(gv * cell_volume);
        }
      }
    }
  }
  const std::size_t used = std::min(max_particles, f.size());
  const std::size_t stride = f.size() / used;
  std::vector<double> partial(used, 0.0);
  parallel_for(used, [&](std::size_t p) {
    const Vec3& v_star = f.velocities[p * stride];
    double acc = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) acc += weights[q] * zeta_fn(norm2(nodes[q] - v_star));
    partial[p] = acc;
  });
  double total = 0.0;
  for (double x : partial) total += x;
  return total / static_cast<double>(used);
}

}  // namespace granulite
