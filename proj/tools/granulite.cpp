// SPDX-License-Identifier: Apache-2.0
// granulite: command-line front end for scenario runs, probes and reports.

#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "granulite/app.hpp"
#include "granulite/restitution.hpp"

namespace {

using granulite::json;

int fail(const std::exception& e) {
  json out;
  out["status"] = "error";
  out["error"] = granulite::detail::error_json(e);
  std::cerr << out.dump() << '\n';
  return granulite::detail::exit_code_for(out["error"]["type"]);
}

int run_probe(const std::string& file, std::optional<granulite::ProbeKind> kind, const std::string& output,
              const std::vector<double>& lambdas, std::optional<double> until) {
  try {
    auto s = granulite::load_scenario(file);
    if (kind) s.probe.kind = *kind;
    if (!output.empty()) s.output_dir = output;
    if (!lambdas.empty()) s.sweep_lambdas = lambdas;
    granulite::validate(s);
    granulite::ExecuteOptions opts;
    opts.log = &std::cerr;
    opts.stop_at = until;
    const auto res = granulite::execute(s, opts);
    std::cout << s.output_dir << '\n';
    return res.exit_code;
  } catch (const std::exception& e) {
    return fail(e);
  }
}

int check_restitution(const std::string& kind, double e0, double a, double gamma, double e_min) {
  try {
    granulite::RestitutionModel model;
    if (kind == "constant") model = granulite::RestitutionModel::constant(e0);
    else if (kind == "viscoelastic") model = granulite::RestitutionModel::viscoelastic(a);
    else if (kind == "capped") model = granulite::RestitutionModel::capped(a, gamma, e_min);
    else throw granulite::InputError("unknown restitution kind '" + kind + "'");
    std::vector<double> grid{0.0};
    for (int i = -120; i <= 40; ++i) grid.push_back(std::pow(10.0, 0.1 * i));
    const auto rep = granulite::check_assumptions(model, grid);
    json out{{"kind", kind},
             {"non_increasing", rep.non_increasing},
             {"r_e_increasing", rep.r_e_increasing},
             {"a", rep.a},
             {"gamma", rep.gamma},
             {"gamma_bar", rep.gamma_bar},
             {"b", rep.b},
             {"all_pass", rep.all_pass()}};
    out["expansion"] = rep.expansion ? json(*rep.expansion) : json("not_applicable");
    std::cout << out.dump(2) << '\n';
    return rep.all_pass() ? 0 : 1;
  } catch (const std::exception& e) {
    return fail(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"granulite: inelastic hard-sphere particle solver and energy-eigenvalue probes"};
  app.require_subcommand(1);

  std::string file, output, dir, checkpoint;
  std::vector<double> lambdas;
  std::optional<double> until;

  auto add_scenario = [&](CLI::App* sub) {
    sub->add_option("scenario", file, "scenario file (YAML)")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", output, "output directory (overrides output.dir)");
  };
  auto* run = app.add_subcommand("run", "execute a scenario as written");
  add_scenario(run);
  run->add_option("--until", until, "stop at this time and leave a checkpoint");
  auto* steady = app.add_subcommand("steady", "steady state and energy balance");
  add_scenario(steady);
  auto* probe = app.add_subcommand("probe-mu", "measure the energy eigenvalue at the scenario lambda");
  add_scenario(probe);
  auto* sweep = app.add_subcommand("sweep-lambda", "measure mu over sweep.lambdas and fit the scaling law");
  add_scenario(sweep);
  sweep->add_option("--lambdas", lambdas, "override sweep.lambdas");
  auto* haff = app.add_subcommand("haff", "free cooling and algebraic-cooling fit");
  add_scenario(haff);

  std::string kind = "viscoelastic";
  double e0 = 0.9, a = 1.0, gamma = 0.5, e_min = 0.5;
  auto* check = app.add_subcommand("check-restitution", "check a restitution law against the structural assumptions");
  check->add_option("--kind", kind, "constant, viscoelastic or capped")->capture_default_str();
  check->add_option("--e0", e0)->capture_default_str();
  check->add_option("--a", a)->capture_default_str();
  check->add_option("--gamma", gamma)->capture_default_str();
  check->add_option("--e-min", e_min)->capture_default_str();

  auto* report = app.add_subcommand("report", "flatten an output directory into a CSV bundle");
  report->add_option("dir", dir, "output directory")->required()->check(CLI::ExistingDirectory);
  auto* resume = app.add_subcommand("resume", "continue a trajectory run from a checkpoint");
  resume->add_option("checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  resume->add_option("--until", until, "stop at this time and leave a checkpoint");

  CLI11_PARSE(app, argc, argv);

  using granulite::ProbeKind;
  if (run->parsed()) return run_probe(file, std::nullopt, output, {}, until);
  if (steady->parsed()) return run_probe(file, ProbeKind::steady, output, {}, std::nullopt);
  if (probe->parsed()) return run_probe(file, ProbeKind::measure_mu, output, {}, std::nullopt);
  if (sweep->parsed()) return run_probe(file, ProbeKind::sweep, output, lambdas, std::nullopt);
  if (haff->parsed()) return run_probe(file, ProbeKind::haff, output, {}, std::nullopt);
  if (check->parsed()) return check_restitution(kind, e0, a, gamma, e_min);
  if (report->parsed()) {
    try {
      for (const auto& p : granulite::write_report(dir)) std::cout << p.string() << '\n';
      return 0;
    } catch (const std::exception& e) {
      return fail(e);
    }
  }
  if (resume->parsed()) {
    granulite::ExecuteOptions opts;
    opts.log = &std::cerr;
    opts.stop_at = until;
    return granulite::resume(checkpoint, opts).exit_code;
  }
  return 0;
}
