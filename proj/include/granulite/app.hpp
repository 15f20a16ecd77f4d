// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scenario execution and the on-disk output bundle:
//   scenario.yaml   resolved scenario (dt filled in for trajectory runs)
//   moments.csv     kMomentCsvHeader rows
//   sweep.csv       kSweepCsvHeader rows (measure_mu and sweep probes)
//   summary.json    build id, resolved config, wall time, status, probe results
//   checkpoint.grnl latest checkpoint (trajectory runs with a checkpoint period)

#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "granulite/checkpoint.hpp"
#include "granulite/dsmc.hpp"
#include "granulite/error.hpp"
#include "granulite/observables.hpp"
#include "granulite/scenario.hpp"
#include "granulite/spectral_probe.hpp"

#ifndef GRANULITE_BUILD_ID
#define GRANULITE_BUILD_ID "unknown"
#endif

namespace granulite {

inline constexpr int kSummarySchemaVersion = 1;
inline constexpr const char* kSweepCsvHeader =
    "lambda,mu_measured,mu_err,mu_predicted,theta_inf,theta_bar,gamma_used,n_particles,seed";
inline constexpr const char* kCheckpointFile = "checkpoint.grnl";

using json = nlohmann::json;

namespace detail {

inline json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Map: {
      json out = json::object();
      for (const auto& kv : node) out[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return out;
    }
    case YAML::NodeType::Sequence: {
      json out = json::array();
      for (const auto& item : node) out.push_back(yaml_to_json(item));
      return out;
    }
    case YAML::NodeType::Scalar: {
      const auto& text = node.Scalar();
      if (node.Tag() == "!") return text;  // quoted
      if (text == "true") return true;
      if (text == "false") return false;
      std::uint64_t u = 0;
      if (auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), u);
          ec == std::errc() && p == text.data() + text.size())
        return u;
      double d = 0.0;
      if (auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), d);
          ec == std::errc() && p == text.data() + text.size())
        return d;
      return text;
    }
    default: return nullptr;
  }
}

inline json error_json(const std::exception& e) {
  json err;
  err["message"] = e.what();
  if (const auto* p = dynamic_cast<const ParseError*>(&e)) {
    err["type"] = "parse_error";
    err["key"] = p->key();
  } else if (dynamic_cast<const ConvergenceError*>(&e)) {
    err["type"] = "convergence_error";
  } else if (dynamic_cast<const QualityError*>(&e)) {
    err["type"] = "quality_error";
  } else if (dynamic_cast<const FormatError*>(&e)) {
    err["type"] = "format_error";
  } else if (dynamic_cast<const ConfigError*>(&e)) {
    err["type"] = "config_error";
  } else if (dynamic_cast<const InputError*>(&e)) {
    err["type"] = "input_error";
  } else {
    err["type"] = "internal_error";
  }
  return err;
}

inline int exit_code_for(const std::string& type) {
  if (type == "parse_error" || type == "input_error" || type == "config_error") return 2;
  if (type == "convergence_error" || type == "quality_error") return 3;
  if (type == "format_error") return 4;
  return 1;
}

inline std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream out(path, std::ios::out | std::ios::binary | mode);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

inline std::string sweep_row(const MuEstimate& m) {
  return format_double(m.lambda) + ',' + format_double(m.mu_measured) + ',' + format_double(m.mu_err) + ',' +
         format_double(m.mu_predicted) + ',' + format_double(m.theta_inf) + ',' + format_double(m.theta_bar) + ',' +
         format_double(m.gamma_used) + ',' + std::to_string(m.n_particles) + ',' + std::to_string(m.seed);
}

inline json mu_json(const MuEstimate& m) {
  return {{"lambda", m.lambda},
          {"mu_measured", m.mu_measured},
          {"mu_err", m.mu_err},
          {"mu_predicted", m.mu_predicted},
          {"ratio", m.mu_measured / m.mu_predicted},
          {"theta_inf", m.theta_inf},
          {"theta_bar", m.theta_bar},
          {"gamma_used", m.gamma_used},
          {"n_particles", m.n_particles},
          {"seed", m.seed},
          {"t_end", m.t_end},
          {"delta", m.delta},
          {"fit", {{"r_squared", m.fit.r_squared}, {"t_start", m.fit.t_start}, {"t_end", m.fit.t_end},
                   {"points", m.fit.points}}}};
}

inline json steady_json(const SteadyState& st) {
  const auto& d = *st.mean_report.dissipation;
  const double target = 6.0 * heat_strength(st.simulation.config());
  return {{"theta_inf", st.mean_report.temperature},
          {"theta_err", st.theta_err},
          {"energy", st.mean_report.energy},
          {"energy_err", st.energy_err},
          {"dissipation", d.value},
          {"dissipation_err", d.std_error},
          {"injection", target},
          {"balance_residual", (d.value - target) / target},
          {"window", {st.window_start, st.window_end}},
          {"collision_time", st.collision_time},
          {"dt", st.simulation.dt()}};
}

/// Keeps the header and the rows strictly before time t_cut.
inline void truncate_moments(const std::filesystem::path& path, double t_cut) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("missing " + path.string() + " next to the checkpoint");
  std::string line, kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      kept += line + '\n';
      header = false;
      continue;
    }
    const auto comma = line.find(',');
    double t = 0.0;
    std::from_chars(line.data(), line.data() + (comma == std::string::npos ? line.size() : comma), t);
    if (t < t_cut) kept += line + '\n';
  }
  in.close();
  write_text(path, kept);
}

}  // namespace detail

struct ExecuteOptions {
  std::optional<double> stop_at;  // stop a trajectory run early (checkpoint written), as if interrupted
  std::ostream* log = nullptr;
};

struct ExecuteResult {
  int exit_code = 0;
  json summary;
};

namespace detail {

struct Context {
  std::filesystem::path dir;
  json summary;
  std::ostream* log;

  void say(const std::string& msg) const {
    if (log) *log << msg << std::endl;
  }
};

/// Trajectory run; rows are flushed as produced and checkpoints land on
/// absolute step multiples, so an interrupted run resumed from its last
/// checkpoint reproduces the uninterrupted moments.csv.
inline void run_trajectory(Simulation& sim, const Scenario& s, Context& ctx, std::optional<double> stop_at,
                           bool append) {
  const ObservableSchedule& schedule = s.schedule;
  std::optional<PsiKernel> kernel;
  if (schedule.dissipation) kernel.emplace(sim.config().model, sim.config().lambda);
  const PsiKernel* kp = kernel ? &*kernel : nullptr;
  const std::uint64_t every = period_steps(schedule.moments_period, sim.dt());
  const std::uint64_t ck_every = s.checkpoint_period ? period_steps(*s.checkpoint_period, sim.dt()) : 0;

  auto csv = open_out(ctx.dir / "moments.csv", append ? std::ios::app : std::ios::trunc);
  if (!append) csv << kMomentCsvHeader << '\n';
  auto report = [&] { csv << to_csv_row(observe(sim, schedule, kp)) << '\n' << std::flush; };
  auto checkpoint = [&] {
    save_checkpoint(ctx.dir / kCheckpointFile,
                    Checkpoint{sim.ensemble(), sim.config().lambda, sim.config().model, sim.config().seed,
                               sim.step_index()});
  };

  const auto k0 = sim.step_index();
  if (k0 == 0 || (every && k0 % every == 0)) report();
  const double t_stop = stop_at ? std::min(*stop_at, s.t_end) : s.t_end;
  const std::uint64_t total = sim.steps_until(t_stop);
  const bool finishes = sim.steps_until(s.t_end) == total;
  for (std::uint64_t k = 0; k < total; ++k) {
    sim.advance();
    const bool last = k + 1 == total;
    if (last || (every && sim.step_index() % every == 0)) report();
    if (ck_every && sim.step_index() % ck_every == 0) checkpoint();
  }
  if (ck_every || !finishes) checkpoint();
  ctx.summary["final_time"] = sim.time();
  ctx.summary["final_step"] = sim.step_index();
  ctx.summary["completed"] = finishes;
  const auto m = moments(sim.ensemble());
  ctx.summary["final_moments"] = {{"energy", m.energy},
                                  {"temperature", m.temperature},
                                  {"momentum", {m.momentum.x, m.momentum.y, m.momentum.z}}};
}

inline SteadyState run_steady(const Scenario& s, const SimConfig& config, Context& ctx) {
  SteadyOptions opts;
  opts.init = s.init;
  ctx.say("steady state: lambda = " + format_double(config.lambda));
  return steady_state(config, opts);
}

inline MuEstimate run_mu(const Scenario& s, const SteadyState& st, Context& ctx) {
  MuOptions opts;
  opts.delta = s.probe.delta;
  opts.replicas = s.probe.replicas;
  ctx.say("linear response: lambda = " + format_double(st.simulation.config().lambda) + ", " +
          std::to_string(opts.replicas) + " replicas");
  return measure_mu(st, opts);
}

inline void execute_body(Scenario s, Context& ctx, const ExecuteOptions& opts) {
  switch (s.probe.kind) {
    case ProbeKind::none: {
      const SimConfig config = s.config();
      Simulation sim(config, init_ensemble(s.init.value_or(InitialCondition{}), config.n_particles, config.seed));
      s.dt = sim.dt();
      write_text(ctx.dir / "scenario.yaml", serialize_scenario(s));
      ctx.summary["config"] = yaml_to_json(YAML::Load(serialize_scenario(s)));
      run_trajectory(sim, s, ctx, opts.stop_at, false);
      break;
    }
    case ProbeKind::haff: {
      const SimConfig config = s.config();
      Simulation sim(config, init_ensemble(s.init.value_or(InitialCondition{}), config.n_particles, config.seed));
      s.dt = sim.dt();
      write_text(ctx.dir / "scenario.yaml", serialize_scenario(s));
      ctx.summary["config"] = yaml_to_json(YAML::Load(serialize_scenario(s)));
      if (s.schedule.moments_period <= 0.0) s.schedule.moments_period = 10.0 * sim.dt();
      RunResult res = run(sim, s.schedule);
      auto csv = open_out(ctx.dir / "moments.csv");
      csv << kMomentCsvHeader << '\n';
      std::vector<TimePoint> temps;
      for (const auto& r : res.trajectory) {
        csv << to_csv_row(r) << '\n';
        temps.push_back({r.time, r.temperature});
      }
      const auto fit = fit_haff(temps);
      ctx.summary["haff"] = {{"p", fit.p}, {"t0", fit.t0}, {"T0", fit.T0}, {"r_squared", fit.r_squared},
                             {"monotone", fit.monotone}};
      break;
    }
    case ProbeKind::steady:
    case ProbeKind::measure_mu: {
      write_text(ctx.dir / "scenario.yaml", serialize_scenario(s));
      ctx.summary["config"] = yaml_to_json(YAML::Load(serialize_scenario(s)));
      const auto st = run_steady(s, s.config(), ctx);
      auto csv = open_out(ctx.dir / "moments.csv");
      csv << kMomentCsvHeader << '\n' << to_csv_row(st.mean_report) << '\n';
      ctx.summary["steady"] = steady_json(st);
      if (s.probe.kind == ProbeKind::measure_mu) {
        const auto mu = run_mu(s, st, ctx);
        auto sweep = open_out(ctx.dir / "sweep.csv");
        sweep << kSweepCsvHeader << '\n' << sweep_row(mu) << '\n';
        ctx.summary["mu"] = mu_json(mu);
      }
      break;
    }
    case ProbeKind::sweep: {
      write_text(ctx.dir / "scenario.yaml", serialize_scenario(s));
      ctx.summary["config"] = yaml_to_json(YAML::Load(serialize_scenario(s)));
      auto csv = open_out(ctx.dir / "moments.csv");
      csv << kMomentCsvHeader << '\n';
      auto sweep = open_out(ctx.dir / "sweep.csv");
      sweep << kSweepCsvHeader << '\n';
      std::vector<MuEstimate> estimates;
      json points = json::array();
      for (double lam : s.sweep_lambdas) {
        const auto st = run_steady(s, s.config_for(lam), ctx);
        csv << to_csv_row(st.mean_report) << '\n' << std::flush;
        const auto mu = run_mu(s, st, ctx);
        sweep << sweep_row(mu) << '\n' << std::flush;
        json point = mu_json(mu);
        point["steady"] = steady_json(st);
        points.push_back(point);
        estimates.push_back(mu);
      }
      ctx.summary["sweep"] = points;
      if (estimates.size() >= 4) {
        const auto fit = scaling_fit(estimates);
        const auto ex = expansion_params(s.config_for(s.sweep_lambdas.front()).model);
        ctx.summary["scaling_fit"] = {{"gamma_hat", fit.gamma_hat},
                                      {"C_hat", fit.C_hat},
                                      {"r_squared", fit.r_squared},
                                      {"gamma_expected", ex.gamma}};
      } else {
        ctx.summary["scaling_fit"] = nullptr;
      }
      break;
    }
  }
}

inline ExecuteResult finish(Context& ctx, std::chrono::steady_clock::time_point start, int code) {
  ctx.summary["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    write_text(ctx.dir / "summary.json", ctx.summary.dump(2) + "\n");
  } catch (const std::exception& e) {
    ctx.say(std::string("cannot write summary: ") + e.what());
    if (code == 0) code = 4;
  }
  return {code, ctx.summary};
}

template <typename Body>
ExecuteResult guarded(Context& ctx, Body&& body) {
  const auto start = std::chrono::steady_clock::now();
  ctx.summary["schema_version"] = kSummarySchemaVersion;
  ctx.summary["build_id"] = GRANULITE_BUILD_ID;
  ctx.summary["threads"] = thread_count();
  try {
    std::filesystem::create_directories(ctx.dir);
    body();
    ctx.summary["status"] = "ok";
    return finish(ctx, start, 0);
  } catch (const std::exception& e) {
    auto err = error_json(e);
    ctx.summary["status"] = "error";
    ctx.summary["error"] = err;
    ctx.say(std::string("error: ") + e.what());
    if (!std::filesystem::is_directory(ctx.dir)) return {exit_code_for(err["type"]), ctx.summary};
    return finish(ctx, start, exit_code_for(err["type"]));
  }
}

}  // namespace detail

/// Runs the scenario's probe (plain trajectory when probe.kind is none) and
/// writes the output bundle into scenario.output_dir.
inline ExecuteResult execute(const Scenario& scenario, const ExecuteOptions& opts = {}) {
  detail::Context ctx{scenario.output_dir, json::object(), opts.log};
  ctx.summary["name"] = scenario.name;
  ctx.summary["probe"] = to_string(scenario.probe.kind);
  return detail::guarded(ctx, [&] {
    validate(scenario);
    detail::execute_body(scenario, ctx, opts);
  });
}

/// Continues a trajectory run from `checkpoint_path`, using the resolved
/// scenario.yaml in the same directory; moments.csv rows at or after the
/// checkpoint time are replaced.
inline ExecuteResult resume(const std::filesystem::path& checkpoint_path, const ExecuteOptions& opts = {}) {
  const auto dir = checkpoint_path.has_parent_path() ? checkpoint_path.parent_path() : std::filesystem::path(".");
  detail::Context ctx{dir, json::object(), opts.log};
  ctx.summary["probe"] = "none";
  return detail::guarded(ctx, [&] {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const Scenario s = load_scenario((dir / "scenario.yaml").string());
    ctx.summary["name"] = s.name;
    if (s.probe.kind != ProbeKind::none) throw FormatError("only trajectory runs can be resumed");
    if (!s.dt) throw FormatError("scenario.yaml next to the checkpoint has no resolved dt");
    const SimConfig config = s.config();
    if (ck.lambda != config.lambda || !(ck.model == config.model) || ck.seed != config.seed ||
        ck.ensemble.size() != config.n_particles)
      throw FormatError("checkpoint does not match scenario.yaml");
    Simulation sim(config, ck.ensemble, ck.step);
    ctx.summary["config"] = detail::yaml_to_json(YAML::Load(serialize_scenario(s)));
    ctx.summary["resumed_from"] = {{"step", ck.step}, {"time", sim.time()}};
    detail::truncate_moments(dir / "moments.csv", sim.time() - 0.5 * sim.dt());
    detail::run_trajectory(sim, s, ctx, opts.stop_at, true);
  });
}

/// Flattens an output directory into <dir>/report: moments.csv, sweep.csv and
/// summary.csv (dotted key, value), plus scaling.csv for sweeps.
inline std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_regular_file(dir / "summary.json")) throw InputError("no summary.json in " + dir.string());
  std::ifstream in(dir / "summary.json");
  json summary;
  try {
    summary = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("summary.json: ") + e.what());
  }
  const fs::path out = dir / "report";
  fs::create_directories(out);
  std::vector<fs::path> written;
  for (const char* name : {"moments.csv", "sweep.csv"}) {
    if (fs::is_regular_file(dir / name)) {
      fs::copy_file(dir / name, out / name, fs::copy_options::overwrite_existing);
      written.push_back(out / name);
    }
  }
  std::string rows = "key,value\n";
  std::function<void(const json&, const std::string&)> flatten = [&](const json& j, const std::string& prefix) {
    if (j.is_object()) {
      for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key());
    } else if (j.is_array()) {
      for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i));
    } else {
      std::string v = j.is_string() ? j.get<std::string>() : j.dump();
      if (v.find_first_of(",\"\n") != std::string::npos) {
        std::string q = "\"";
        for (char c : v) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        v = q + "\"";
      }
      rows += prefix + ',' + v + '\n';
    }
  };
  flatten(summary, "");
  detail::write_text(out / "summary.csv", rows);
  written.push_back(out / "summary.csv");
  if (summary.contains("sweep") && summary["sweep"].is_array()) {
    std::string sc = "lambda,abs_mu_measured,mu_err,abs_mu_predicted,abs_mu_fit\n";
    const bool has_fit = summary.contains("scaling_fit") && summary["scaling_fit"].is_object();
    for (const auto& p : summary["sweep"]) {
      const double lam = p["lambda"];
      const double fit = has_fit ? summary["scaling_fit"]["C_hat"].get<double>() *
                                       std::pow(lam, summary["scaling_fit"]["gamma_hat"].get<double>())
                                 : std::nan("");
      sc += detail::format_double(lam) + ',' + detail::format_double(-p["mu_measured"].get<double>()) + ',' +
            detail::format_double(p["mu_err"].get<double>()) + ',' +
            detail::format_double(-p["mu_predicted"].get<double>()) + ',' +
            (has_fit ? detail::format_double(fit) : std::string()) + '\n';
    }
    detail::write_text(out / "scaling.csv", sc);
    written.push_back(out / "scaling.csv");
  }
  return written;
}

}  // namespace granulite
