// SPDX-License-Identifier: Apache-2.0
#pragma once

// Normal restitution laws e(r) of the impact speed r and their rescaling
// e_lambda(r) = e(lambda r).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "granulite/error.hpp"

namespace granulite {

struct ConstantLaw {
  double e0 = 1.0;
  friend bool operator==(const ConstantLaw&, const ConstantLaw&) = default;
};

/// Viscoelastic spheres: e solves e + a r^{1/5} e^{3/5} = 1.
struct ViscoelasticLaw {
  double a = 1.0;
  friend bool operator==(const ViscoelasticLaw&, const ViscoelasticLaw&) = default;
};

/// e(r) = max(1 - a r^gamma, e_min).
struct CappedPowerLaw {
  double a = 1.0;
  double gamma = 0.5;
  double e_min = 0.1;
  friend bool operator==(const CappedPowerLaw&, const CappedPowerLaw&) = default;
};

class RestitutionModel {
 public:
  using Law = std::variant<ConstantLaw, ViscoelasticLaw, CappedPowerLaw>;

  RestitutionModel() : law_(ConstantLaw{1.0}) {}

  static RestitutionModel constant(double e0) {
    if (!(e0 > 0.0 && e0 <= 1.0)) throw InputError("constant restitution e0 must lie in (0, 1]");
    return RestitutionModel(ConstantLaw{e0});
  }
  static RestitutionModel viscoelastic(double a = 1.0) {
    if (!(a > 0.0) || !std::isfinite(a)) throw InputError("viscoelastic a must be positive");
    return RestitutionModel(ViscoelasticLaw{a});
  }
  static RestitutionModel capped(double a, double gamma, double e_min) {
    if (!(a > 0.0) || !std::isfinite(a)) throw InputError("capped power law a must be positive");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw InputError("capped power law gamma must lie in (0, 1]");
    if (!(e_min > 0.0 && e_min < 1.0)) throw InputError("capped power law e_min must lie in (0, 1)");
    return RestitutionModel(CappedPowerLaw{a, gamma, e_min});
  }

  const Law& law() const { return law_; }
  bool is_constant() const { return std::holds_alternative<ConstantLaw>(law_); }

  std::string kind() const {
    return std::visit(
        [](const auto& l) -> std::string {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, ConstantLaw>) return "constant";
          else if constexpr (std::is_same_v<T, ViscoelasticLaw>) return "viscoelastic";
          else return "capped";
        },
        law_);
  }

  friend bool operator==(const RestitutionModel&, const RestitutionModel&) = default;

 private:
  explicit RestitutionModel(Law law) : law_(law) {}
  Law law_;
};

namespace detail {

// Root of y^5 + c y^3 = 1 on (0, 1], with y = e^{1/5}. The map is increasing
// and convex on (0, 1], so Newton started at y = 1 decreases monotonically
// onto the root.
inline double viscoelastic_root(double c) {
  if (c == 0.0) return 1.0;
  double y = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double y2 = y * y;
    const double y3 = y2 * y;
    const double f = y3 * y2 + c * y3 - 1.0;
    const double df = 5.0 * y2 * y2 + 3.0 * c * y2;
    const double next = y - f / df;
    if (!(next < y)) break;
    y = next;
  }
  const double y2 = y * y;
  return y2 * y2 * y;
}

}  // namespace detail

/// e(r) for impact speed r >= 0.
inline double eval(const RestitutionModel& model, double r) {
  if (!std::isfinite(r) || r < 0.0) throw InputError("impact speed must be finite and non-negative");
  return std::visit(
      [r](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, ConstantLaw>) {
          return l.e0;
        } else if constexpr (std::is_same_v<T, ViscoelasticLaw>) {
          if (r == 0.0) return 1.0;
          return detail::viscoelastic_root(l.a * std::pow(r, 0.2));
        } else {
          if (r == 0.0) return 1.0;
          return std::max(1.0 - l.a * std::pow(r, l.gamma), l.e_min);
        }
      },
      model.law());
}

/// e_lambda(r) = e(lambda r). Constant laws ignore the rescaling.
inline double eval_scaled(const RestitutionModel& model, double lambda, double r) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("lambda must lie in [0, 1]");
  if (model.is_constant()) {
    if (!std::isfinite(r) || r < 0.0) throw InputError("impact speed must be finite and non-negative");
    return std::get<ConstantLaw>(model.law()).e0;
  }
  return eval(model, lambda * r);
}

/// 1 - e_lambda(r) without cancellation: for the viscoelastic law the implicit
/// equation gives 1 - e = a r^{1/5} e^{3/5} directly.
inline double deficit_scaled(const RestitutionModel& model, double lambda, double r) {
  const double e = eval_scaled(model, lambda, r);
  return std::visit(
      [&](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        const double x = lambda * r;
        if constexpr (std::is_same_v<T, ConstantLaw>) {
          return 1.0 - l.e0;
        } else if constexpr (std::is_same_v<T, ViscoelasticLaw>) {
          return x == 0.0 ? 0.0 : l.a * std::pow(x, 0.2) * std::pow(e, 0.6);
        } else {
          return x == 0.0 ? 0.0 : std::min(l.a * std::pow(x, l.gamma), 1.0 - l.e_min);
        }
      },
      model.law());
}

/// Small-speed expansion |e(r) - 1 + a r^gamma| <= b r^gamma_bar.
///
/// `gamma` is the exponent of lambda in the heat-bath strength lambda^gamma.
/// `speed_exponent` is the power of the impact speed in 1 - e_lambda at
/// leading order: equal to gamma for rescaled laws, 0 for the constant law
/// e = 1 - lambda (whose expansion is reported with a = 1, gamma = 1).
struct ExpansionParams {
  double a = 1.0;
  double gamma = 1.0;
  double gamma_bar = 2.0;
  double speed_exponent = 0.0;
  friend bool operator==(const ExpansionParams&, const ExpansionParams&) = default;
};

inline ExpansionParams expansion_params(const RestitutionModel& model) {
  return std::visit(
      [](const auto& l) -> ExpansionParams {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, ConstantLaw>) {
          return {1.0, 1.0, 2.0, 0.0};
        } else if constexpr (std::is_same_v<T, ViscoelasticLaw>) {
          return {l.a, 0.2, 0.4, 0.2};
        } else {
          return {l.a, l.gamma, std::min(2.0 * l.gamma, 1.0), l.gamma};
        }
      },
      model.law());
}

struct AssumptionReport {
  bool non_increasing = false;     // e is non-increasing on the grid
  bool r_e_increasing = false;     // r e(r) is strictly increasing on the grid
  std::optional<bool> expansion;   // empty: not applicable (constant law)
  double a = 0.0;
  double gamma = 0.0;
  double gamma_bar = 0.0;
  double b = 0.0;

  bool all_pass() const { return non_increasing && r_e_increasing && expansion.value_or(true); }
};

namespace detail {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return {slope, my - slope * mx};
}

}  // namespace detail

/// Checks the three structural assumptions on e(.) over an ascending grid.
///
/// Clauses (1) and (2) are checked pointwise on the grid. For clause (3) the
/// expansion is asymptotic at r = 0, so (a, gamma) come from a log-log
/// regression of 1 - e(r) over the half-decades where the deficit lies in
/// [1e-10, 1e-6] (deep enough for the leading term, clear of round-off); gamma_bar from the
/// regression of the remainder over [1e-12, 1e-6]; b is the smallest constant
/// making the bound hold on every probed radius (grid plus the probe decades).
inline AssumptionReport check_assumptions(const RestitutionModel& model, std::span<const double> r_grid) {
  if (r_grid.size() < 2) throw InputError("assumption grid needs at least two points");
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (!std::isfinite(r_grid[i]) || r_grid[i] < 0.0) throw InputError("assumption grid must be non-negative");
    if (i > 0 && !(r_grid[i] > r_grid[i - 1])) throw InputError("assumption grid must be strictly ascending");
  }

  AssumptionReport report;
  report.non_increasing = true;
  report.r_e_increasing = true;
  double prev_e = eval(model, r_grid[0]);
  double prev_re = r_grid[0] * prev_e;
  for (std::size_t i = 1; i < r_grid.size(); ++i) {
    const double e = eval(model, r_grid[i]);
    const double re = r_grid[i] * e;
    if (e > prev_e * (1.0 + 1e-14)) report.non_increasing = false;
    if (!(re > prev_re)) report.r_e_increasing = false;
    prev_e = e;
    prev_re = re;
  }

  if (model.is_constant()) return report;

  std::vector<double> lx, ly;
  for (int k = 0; k <= 600; ++k) {
    const double r = std::pow(10.0, -0.5 * k);
    const double deficit = 1.0 - eval(model, r);
    if (deficit >= 1e-10 && deficit <= 1e-6) {
      lx.push_back(std::log(r));
      ly.push_back(std::log(deficit));
    }
  }
  if (lx.size() < 2) {
    report.expansion = false;
    return report;
  }
  const auto lead = detail::least_squares(lx, ly);
  report.gamma = lead.slope;
  report.a = std::exp(lead.intercept);

  auto remainder = [&](double r) { return std::abs(eval(model, r) - 1.0 + report.a * std::pow(r, report.gamma)); };

  std::vector<double> rx, ry;
  double largest = 0.0;
  for (int k = 0; k <= 24; ++k) {
    const double r = std::pow(10.0, -6.0 - 0.25 * k);
    const double rem = remainder(r);
    largest = std::max(largest, rem);
    if (rem > 0.0) {
      rx.push_back(std::log(r));
      ry.push_back(std::log(rem));
    }
  }
  // A remainder at round-off level means an exact power law near 0.
  report.gamma_bar = (largest > 1e-13 && rx.size() >= 2) ? detail::least_squares(rx, ry).slope : 2.0 * report.gamma;

  std::vector<double> probes(r_grid.begin(), r_grid.end());
  for (int k = 1; k <= 30; ++k) probes.push_back(std::pow(10.0, -k));
  double b = 0.0;
  for (double r : probes) {
    if (r <= 0.0) continue;
    b = std::max(b, remainder(r) / std::pow(r, report.gamma_bar));
  }
  report.b = b;
  report.expansion = std::isfinite(b) && report.gamma_bar > report.gamma && report.gamma > 0.0 && report.a > 0.0;
  return report;
}

}  // namespace granulite
