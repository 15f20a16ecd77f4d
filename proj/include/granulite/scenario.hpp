// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scenario documents: YAML with one level of sections.
//
//   name: demo
//   lambda: 0.1
//   restitution: {kind: constant}     # e0 defaults to 1 - lambda
//   n_particles: 1e5
//   cells: [1, 1, 1]
//   t_end: 2.0
//   init: {kind: maxwellian, theta: 1.0}
//   schedule: {moments_period: 0.1, modes: [[1, 0, 0]]}
//   probe: {kind: measure_mu, delta: 0.1, replicas: 8}
//   sweep: {lambdas: [0.02, 0.05, 0.1, 0.2]}
//   output: {dir: out}

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "granulite/dsmc.hpp"
#include "granulite/ensemble.hpp"
#include "granulite/error.hpp"
#include "granulite/observables.hpp"
#include "granulite/restitution.hpp"

namespace granulite {

struct RestitutionSpec {
  std::string kind = "constant";
  std::optional<double> e0;  // constant law; empty means e0 = 1 - lambda
  double a = 1.0;
  double gamma = 0.5;
  double e_min = 0.1;

  RestitutionModel build(double lambda) const {
    if (kind == "constant") return RestitutionModel::constant(e0 ? *e0 : 1.0 - lambda);
    if (kind == "viscoelastic") return RestitutionModel::viscoelastic(a);
    if (kind == "capped") return RestitutionModel::capped(a, gamma, e_min);
    throw InputError("unknown restitution kind '" + kind + "'");
  }

  friend bool operator==(const RestitutionSpec&, const RestitutionSpec&) = default;
};

enum class ProbeKind { none, steady, measure_mu, haff, sweep };

inline std::string to_string(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::none: return "none";
    case ProbeKind::steady: return "steady";
    case ProbeKind::measure_mu: return "measure_mu";
    case ProbeKind::haff: return "haff";
    case ProbeKind::sweep: return "sweep";
  }
  return "none";
}

struct ProbeSpec {
  ProbeKind kind = ProbeKind::none;
  double delta = 0.1;
  std::size_t replicas = 8;

  friend bool operator==(const ProbeSpec&, const ProbeSpec&) = default;
};

struct Scenario {
  std::string name = "scenario";
  double lambda = 0.0;
  RestitutionSpec restitution;
  std::size_t n_particles = 100'000;
  std::array<int, 3> cells{1, 1, 1};
  std::optional<double> dt;
  double t_end = 1.0;
  bool thermostat = true;
  bool momentum_projection = true;
  std::uint64_t seed = 1;
  std::optional<InitialCondition> init;  // empty: Maxwellian, theta = 1 (balance temperature for probes)
  ObservableSchedule schedule;
  ProbeSpec probe;
  std::vector<double> sweep_lambdas;
  std::string output_dir = "granulite-out";
  std::optional<double> checkpoint_period;

  SimConfig config_for(double lam) const {
    SimConfig c;
    c.lambda = lam;
    c.model = restitution.build(lam);
    c.n_particles = n_particles;
    c.cells = cells;
    c.dt = dt;
    c.thermostat = thermostat;
    c.momentum_projection = momentum_projection;
    c.seed = seed;
    c.t_end = t_end;
    return c;
  }
  SimConfig config() const { return config_for(lambda); }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

namespace detail {

inline std::string where(const YAML::Node& node) {
  const auto m = node.Mark();
  if (m.is_null()) return "";
  return " (line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1) + ")";
}

class Reader {
 public:
  Reader(const YAML::Node& map, std::string prefix) : map_(map), prefix_(std::move(prefix)) {
    if (!map_.IsMap()) throw ParseError(prefix_.empty() ? "<document>" : prefix_, "expected a mapping" + where(map_));
  }

  std::string key(const std::string& k) const { return prefix_.empty() ? k : prefix_ + "." + k; }

  YAML::Node get(const std::string& k) {
    seen_.insert(k);
    return map_[k];
  }

  bool has(const std::string& k) { return static_cast<bool>(get(k)); }

  template <typename T>
  T require(const std::string& k) {
    auto node = get(k);
    if (!node) throw ParseError(key(k), "missing required key");
    return convert<T>(node, k);
  }

  template <typename T>
  std::optional<T> optional(const std::string& k) {
    auto node = get(k);
    if (!node || node.IsNull()) return std::nullopt;
    return convert<T>(node, k);
  }

  template <typename T>
  T value_or(const std::string& k, T fallback) {
    auto v = optional<T>(k);
    return v ? *v : fallback;
  }

  Reader section(const std::string& k) {
    auto node = get(k);
    if (!node || node.IsNull()) return Reader(YAML::Node(YAML::NodeType::Map), key(k));
    return Reader(node, key(k));
  }

  /// Rejects keys that were never looked up.
  void finish() const {
    for (const auto& kv : map_) {
      const auto k = kv.first.as<std::string>();
      if (!seen_.count(k)) throw ParseError(key(k), "unknown key" + where(kv.first));
    }
  }

  template <typename T>
  T convert(const YAML::Node& node, const std::string& k) const {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      // Accepts 100000 as well as 1e5; must be a non-negative integer.
      const double x = convert<double>(node, k);
      if (!(x >= 0.0) || x != std::floor(x) || x > 1.8e19)
        throw ParseError(key(k), "expected a non-negative integer" + where(node));
      if (x > 9.007e15) {
        try {
          return node.as<std::uint64_t>();
        } catch (const YAML::Exception&) {
          throw ParseError(key(k), "expected a non-negative integer" + where(node));
        }
      }
      return static_cast<T>(x);
    } else {
      if (!node.IsScalar()) throw ParseError(key(k), "expected a scalar" + where(node));
      try {
        return node.as<T>();
      } catch (const YAML::Exception&) {
        throw ParseError(key(k), "type mismatch" + where(node));
      }
    }
  }

  const YAML::Node& node() const { return map_; }

 private:
  YAML::Node map_;
  std::string prefix_;
  std::set<std::string> seen_;
};

inline std::vector<double> read_number_list(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence()) throw ParseError(key, "expected a list" + where(node));
  std::vector<double> out;
  for (const auto& item : node) {
    try {
      out.push_back(item.as<double>());
    } catch (const YAML::Exception&) {
      throw ParseError(key, "expected numbers" + where(item));
    }
  }
  return out;
}

inline std::array<int, 3> read_int3(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence() || node.size() != 3) throw ParseError(key, "expected a list of 3 integers" + where(node));
  std::array<int, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    try {
      out[i] = node[i].as<int>();
    } catch (const YAML::Exception&) {
      throw ParseError(key, "expected integers" + where(node[i]));
    }
  }
  return out;
}

}  // namespace detail

/// Range and consistency checks; throws ParseError naming the offending key.
inline void validate(const Scenario& s) {
  if (s.name.empty()) throw ParseError("name", "must not be empty");
  if (!(s.lambda >= 0.0 && s.lambda <= 1.0)) throw ParseError("lambda", "must lie in [0, 1]");
  const auto& r = s.restitution;
  if (r.kind != "constant" && r.kind != "viscoelastic" && r.kind != "capped")
    throw ParseError("restitution.kind", "expected constant, viscoelastic or capped, got '" + r.kind + "'");
  if (r.kind == "constant" && r.e0 && !(*r.e0 > 0.0 && *r.e0 <= 1.0))
    throw ParseError("restitution.e0", "must lie in (0, 1]");
  if (r.kind != "constant" && !(r.a > 0.0 && std::isfinite(r.a))) throw ParseError("restitution.a", "must be positive");
  if (r.kind == "capped" && !(r.gamma > 0.0 && r.gamma <= 1.0))
    throw ParseError("restitution.gamma", "must lie in (0, 1]");
  if (r.kind == "capped" && !(r.e_min > 0.0 && r.e_min < 1.0))
    throw ParseError("restitution.e_min", "must lie in (0, 1)");
  if (s.n_particles < 2) throw ParseError("n_particles", "must be at least 2");
  for (int c : s.cells)
    if (c < 1 || c > 1024) throw ParseError("cells", "entries must lie in [1, 1024]");
  if (s.dt && !(*s.dt > 0.0 && std::isfinite(*s.dt))) throw ParseError("dt", "must be positive");
  if (!(s.t_end >= 0.0 && std::isfinite(s.t_end))) throw ParseError("t_end", "must be non-negative");
  if (s.init) {
    try {
      validate(*s.init);
    } catch (const InputError& e) {
      throw ParseError("init", e.what());
    }
  }
  if (!(s.schedule.moments_period >= 0.0)) throw ParseError("schedule.moments_period", "must be non-negative");
  if (s.schedule.dissipation_samples < 1) throw ParseError("schedule.dissipation_samples", "must be positive");
  if (s.schedule.tail_A && !(*s.schedule.tail_A > 0.0)) throw ParseError("schedule.tail_A", "must be positive");
  if (!(s.schedule.tail_p > 0.0 && s.schedule.tail_p <= 2.0)) throw ParseError("schedule.tail_p", "must lie in (0, 2]");
  if (!(s.probe.delta > 0.0 && s.probe.delta <= 0.2)) throw ParseError("probe.delta", "must lie in (0, 0.2]");
  if (s.probe.replicas < 2) throw ParseError("probe.replicas", "must be at least 2");
  std::set<double> distinct;
  for (double l : s.sweep_lambdas) {
    if (!(l > 0.0 && l < 1.0)) throw ParseError("sweep.lambdas", "values must lie in (0, 1)");
    if (!distinct.insert(l).second) throw ParseError("sweep.lambdas", "duplicate value " + detail::format_double(l));
  }
  if (s.checkpoint_period && !(*s.checkpoint_period > 0.0))
    throw ParseError("output.checkpoint_period", "must be positive");

  const bool homogeneous = s.cells == std::array<int, 3>{1, 1, 1};
  switch (s.probe.kind) {
    case ProbeKind::none: break;
    case ProbeKind::sweep:
      if (s.sweep_lambdas.empty()) throw ParseError("sweep.lambdas", "required when probe.kind is sweep");
      [[fallthrough]];
    case ProbeKind::steady:
    case ProbeKind::measure_mu:
      if (!homogeneous) throw ParseError("cells", "probes need a homogeneous grid [1, 1, 1]");
      if (!s.thermostat && !(s.lambda == 0.0 && s.probe.kind != ProbeKind::sweep))
        throw ParseError("thermostat", "probes need the thermostat on");
      if (s.thermostat && s.probe.kind != ProbeKind::sweep && !(s.lambda > 0.0))
        throw ParseError("lambda", "thermostatted probes need lambda > 0");
      break;
    case ProbeKind::haff:
      if (s.thermostat) throw ParseError("thermostat", "the haff probe needs the thermostat off");
      break;
  }
}

inline Scenario parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ParseError("<document>", std::string("malformed document: ") + e.what());
  }
  if (!root || root.IsNull()) throw ParseError("<document>", "empty document");
  detail::Reader top(root, "");
  Scenario s;
  s.name = top.value_or<std::string>("name", s.name);
  s.lambda = top.require<double>("lambda");

  auto rest = top.section("restitution");
  s.restitution.kind = rest.require<std::string>("kind");
  s.restitution.e0 = rest.optional<double>("e0");
  s.restitution.a = rest.value_or("a", s.restitution.a);
  s.restitution.gamma = rest.value_or("gamma", s.restitution.gamma);
  s.restitution.e_min = rest.value_or("e_min", s.restitution.e_min);
  rest.finish();

  s.n_particles = top.require<std::size_t>("n_particles");
  if (auto node = top.get("cells"); node) s.cells = detail::read_int3(node, "cells");
  if (auto node = top.get("dt"); node && !node.IsNull() && !(node.IsScalar() && node.Scalar() == "auto"))
    s.dt = top.convert<double>(node, "dt");
  s.t_end = top.value_or("t_end", s.t_end);
  s.thermostat = top.value_or("thermostat", s.thermostat);
  s.momentum_projection = top.value_or("momentum_projection", s.momentum_projection);
  s.seed = top.value_or<std::uint64_t>("seed", s.seed);

  if (top.has("init")) {
    auto in = top.section("init");
    InitialCondition ic;
    const auto kind = in.require<std::string>("kind");
    if (kind == "maxwellian") ic.kind = InitialCondition::Kind::maxwellian;
    else if (kind == "two_temperature") ic.kind = InitialCondition::Kind::two_temperature;
    else if (kind == "modulated") ic.kind = InitialCondition::Kind::modulated;
    else throw ParseError("init.kind", "expected maxwellian, two_temperature or modulated" + detail::where(in.get("kind")));
    ic.theta = in.value_or("theta", ic.theta);
    ic.theta2 = in.value_or("theta2", ic.theta2);
    ic.fraction = in.value_or("fraction", ic.fraction);
    ic.epsilon = in.value_or("epsilon", ic.epsilon);
    if (auto node = in.get("k"); node) ic.k = detail::read_int3(node, "init.k");
    in.finish();
    s.init = ic;
  }

  {
    auto sc = top.section("schedule");
    s.schedule.moments_period = sc.value_or("moments_period", s.schedule.moments_period);
    if (auto node = sc.get("modes"); node && !node.IsNull()) {
      if (!node.IsSequence()) throw ParseError("schedule.modes", "expected a list of [k1, k2, k3]" + detail::where(node));
      for (const auto& m : node) s.schedule.modes.push_back(detail::read_int3(m, "schedule.modes"));
    }
    s.schedule.dissipation = sc.value_or("dissipation", s.schedule.dissipation);
    s.schedule.dissipation_samples = sc.value_or<std::size_t>("dissipation_samples", s.schedule.dissipation_samples);
    s.schedule.tail_A = sc.optional<double>("tail_A");
    s.schedule.tail_p = sc.value_or("tail_p", s.schedule.tail_p);
    sc.finish();
  }
  {
    auto pr = top.section("probe");
    const auto kind = pr.value_or<std::string>("kind", "none");
    if (kind == "none") s.probe.kind = ProbeKind::none;
    else if (kind == "steady") s.probe.kind = ProbeKind::steady;
    else if (kind == "measure_mu") s.probe.kind = ProbeKind::measure_mu;
    else if (kind == "haff") s.probe.kind = ProbeKind::haff;
    else if (kind == "sweep") s.probe.kind = ProbeKind::sweep;
    else throw ParseError("probe.kind", "expected none, steady, measure_mu, haff or sweep" + detail::where(pr.get("kind")));
    s.probe.delta = pr.value_or("delta", s.probe.delta);
    s.probe.replicas = pr.value_or<std::size_t>("replicas", s.probe.replicas);
    pr.finish();
  }
  {
    auto sw = top.section("sweep");
    if (auto node = sw.get("lambdas"); node && !node.IsNull())
      s.sweep_lambdas = detail::read_number_list(node, "sweep.lambdas");
    sw.finish();
  }
  {
    auto out = top.section("output");
    s.output_dir = out.value_or<std::string>("dir", s.output_dir);
    s.checkpoint_period = out.optional<double>("checkpoint_period");
    out.finish();
  }
  top.finish();
  validate(s);
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("<document>", "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

/// Fully resolved document; parse_scenario(serialize_scenario(s)) == s.
inline std::string serialize_scenario(const Scenario& s) {
  YAML::Emitter out;
  auto num = [&](double x) { out << YAML::Value << detail::format_double(x); };
  auto int3 = [&](const std::array<int, 3>& a) {
    out << YAML::Flow << YAML::BeginSeq << a[0] << a[1] << a[2] << YAML::EndSeq;
  };
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << s.name;
  out << YAML::Key << "lambda";
  num(s.lambda);
  out << YAML::Key << "restitution" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << s.restitution.kind;
  if (s.restitution.e0) {
    out << YAML::Key << "e0";
    num(*s.restitution.e0);
  }
  out << YAML::Key << "a";
  num(s.restitution.a);
  out << YAML::Key << "gamma";
  num(s.restitution.gamma);
  out << YAML::Key << "e_min";
  num(s.restitution.e_min);
  out << YAML::EndMap;
  out << YAML::Key << "n_particles" << YAML::Value << static_cast<std::uint64_t>(s.n_particles);
  out << YAML::Key << "cells" << YAML::Value;
  int3(s.cells);
  out << YAML::Key << "dt";
  if (s.dt) num(*s.dt);
  else out << YAML::Value << "auto";
  out << YAML::Key << "t_end";
  num(s.t_end);
  out << YAML::Key << "thermostat" << YAML::Value << s.thermostat;
  out << YAML::Key << "momentum_projection" << YAML::Value << s.momentum_projection;
  out << YAML::Key << "seed" << YAML::Value << s.seed;
  if (s.init) {
    out << YAML::Key << "init" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << to_string(s.init->kind);
    out << YAML::Key << "theta";
    num(s.init->theta);
    out << YAML::Key << "theta2";
    num(s.init->theta2);
    out << YAML::Key << "fraction";
    num(s.init->fraction);
    out << YAML::Key << "epsilon";
    num(s.init->epsilon);
    out << YAML::Key << "k" << YAML::Value;
    int3(s.init->k);
    out << YAML::EndMap;
  }
  out << YAML::Key << "schedule" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "moments_period";
  num(s.schedule.moments_period);
  out << YAML::Key << "modes" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& k : s.schedule.modes) int3(k);
  out << YAML::EndSeq;
  out << YAML::Key << "dissipation" << YAML::Value << s.schedule.dissipation;
  out << YAML::Key << "dissipation_samples" << YAML::Value << static_cast<std::uint64_t>(s.schedule.dissipation_samples);
  if (s.schedule.tail_A) {
    out << YAML::Key << "tail_A";
    num(*s.schedule.tail_A);
  }
  out << YAML::Key << "tail_p";
  num(s.schedule.tail_p);
  out << YAML::EndMap;
  out << YAML::Key << "probe" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << to_string(s.probe.kind);
  out << YAML::Key << "delta";
  num(s.probe.delta);
  out << YAML::Key << "replicas" << YAML::Value << static_cast<std::uint64_t>(s.probe.replicas);
  out << YAML::EndMap;
  out << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "lambdas" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double l : s.sweep_lambdas) out << detail::format_double(l);
  out << YAML::EndSeq << YAML::EndMap;
  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dir" << YAML::Value << YAML::DoubleQuoted << s.output_dir;
  if (s.checkpoint_period) {
    out << YAML::Key << "checkpoint_period";
    num(*s.checkpoint_period);
  }
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace granulite
