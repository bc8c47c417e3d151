// qkdcs: key-rate sweeps, single-distance solves and self-checks.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qkdcs/config_io.hpp"
#include "qkdcs/keyrate.hpp"
#include "qkdcs/selfcheck.hpp"

namespace {

using namespace qkdcs;

ScenarioFile scenario_from(const std::string& path) {
  if (path.empty()) return ScenarioFile{default_config(), SweepRange{}};
  return load_scenario(path);
}

int run_sweep_command(const std::string& config, std::optional<double> start, std::optional<double> stop,
                      std::optional<double> step, std::optional<std::string> mode, const std::string& output) {
  const auto sc = scenario_from(config);
  SweepConfig sweep;
  sweep.scenario = sc.model;
  sweep.mode = mode ? parse_mode(*mode) : sc.sweep.mode;
  sweep.distances_km = distance_range(start.value_or(sc.sweep.start), stop.value_or(sc.sweep.stop),
                                      step.value_or(sc.sweep.step));
  sweep.output_path = output;

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!output.empty() && output != "-") {
    file.open(output);
    if (!file) throw ConfigError("cannot open output file '" + output + "'");
    os = &file;
  }
  const auto tables = build_tables(sweep.scenario);
  write_csv_header(*os);
  bool hard_error = false;
  for (double d : sweep.distances_km) {
    const auto r = evaluate_point(sweep.scenario, tables, d, sweep.mode);
    write_csv_row(*os, r);
    os->flush();
    if (r.status.starts_with("error")) hard_error = true;
  }
  return hard_error ? 3 : 0;
}

void print_vector(std::ostream& os, const EstimationProgram& p, const std::vector<double>& x) {
  for (std::size_t j = 0; j < x.size(); ++j) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x[j]);
    os << "  " << variable_name(p, j) << " = " << buf << "\n";
  }
}

int run_solve_command(const std::string& config, double distance, const std::string& lp_dir) {
  const auto sc = scenario_from(config);
  const auto& cfg = sc.model;
  const auto tables = build_tables(cfg);
  const auto obs = observables(cfg, distance);
  ChannelParams ch = cfg.channel;
  ch.distance_km = distance;
  const auto refs = canonical_references(ch, cfg.protocol.n_cut);
  const auto programs = build_programs(cfg, tables, obs);

  for (std::size_t i = 0; i < programs.size(); ++i) {
    const auto& p = programs[i];
    const std::string name = to_string(p.kind);
    if (!lp_dir.empty()) {
      std::ofstream f(lp_dir + "/" + name + ".lp");
      if (!f) throw ConfigError("cannot write to directory '" + lp_dir + "'");
      write_lp_text(f, p);
    } else {
      write_lp_text(std::cout, p);
    }
    const auto start = reference_point(p, refs);
    const auto canonical = certify(p, start);
    std::printf("%s canonical-refs bound %.15g\n", name.c_str(), canonical.bound);
    try {
      const auto cand = slp_candidate(p, start);
      const auto cert = certify(p, cand.x, cand.objective);
      std::printf("%s candidate objective %.15g after %d iterations (residual %.3g)\n", name.c_str(), cand.objective,
                  cand.iterations, cand.residual);
      std::printf("%s candidate-refs bound %.15g gap %.3g certificate %s\n", name.c_str(), cert.bound, cert.gap,
                  to_string(cert.certificate));
      std::cout << name << " candidate point:\n";
      print_vector(std::cout, p, cand.x);
      std::cout << name << " relaxed LP optimum:\n";
      print_vector(std::cout, p, cert.x);
    } catch (const NoFeasibleCandidate& e) {
      std::printf("%s no feasible candidate: %s\n", name.c_str(), e.what());
    }
  }
  const auto r = evaluate_point(cfg, tables, distance);
  write_csv_header(std::cout);
  write_csv_row(std::cout, r);
  return r.status.starts_with("error") ? 3 : 0;
}

int run_check_command() {
  bool all = true;
  for (const auto& c : run_selfcheck()) {
    std::printf("%s %s (%s)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    all = all && c.passed;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified decoy-state key rates for intensity-correlated sources"};
  app.require_subcommand(1);

  std::string config;
  std::optional<double> start, stop, step;
  std::optional<std::string> mode;
  std::string output;
  auto* sweep = app.add_subcommand("sweep", "Key rate over a range of distances, written as CSV");
  sweep->add_option("-c,--config", config, "Scenario file (JSON); defaults to the built-in scenario");
  sweep->add_option("--start", start, "First distance in km");
  sweep->add_option("--stop", stop, "Last distance in km");
  sweep->add_option("--step", step, "Distance step in km");
  sweep->add_option("-m,--mode", mode, "candidate, canonical or both");
  sweep->add_option("-o,--output", output, "Output CSV path, '-' for stdout");

  double distance = 0.0;
  std::string lp_dir;
  auto* solve = app.add_subcommand("solve", "Solve the three programs at one distance and print them");
  solve->add_option("-c,--config", config, "Scenario file (JSON)");
  solve->add_option("-d,--distance", distance, "Distance in km")->check(CLI::NonNegativeNumber);
  solve->add_option("--lp-dir", lp_dir, "Write the programs as .lp files into this directory");

  auto* check = app.add_subcommand("check", "Run oracle and property checks on small instances");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sweep) return run_sweep_command(config, start, stop, step, mode, output);
    if (*solve) return run_solve_command(config, distance, lp_dir);
    if (*check) return run_check_command();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
