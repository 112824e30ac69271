// pinnverse: batch runner for inverse-problem experiments.
//
//   pinnverse run --config <ini> [--override section.key=value]... [--workers N]
//   pinnverse validate --config <ini>
//   pinnverse oracle <benchmark> --eta v1,v2,... --out <csv>

#include <CLI11.hpp>

#include <iostream>
#include <thread>

#include "pinnverse/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

std::vector<double> parse_eta(const std::string& text) {
  std::vector<double> eta = pinnverse::detail::parse_doubles("--eta", text);
  if (eta.empty()) throw pinnverse::ConfigError("--eta: no values given");
  return eta;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse problems with constrained physics-informed networks"};
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> overrides;
  std::size_t workers = 1;
  auto* run = app.add_subcommand("run", "Run a method x (zeta, xi) grid");
  run->add_option("--config", config, "INI configuration")->required()->check(CLI::ExistingFile);
  run->add_option("--override", overrides, "section.key=value, applied after the file");
  run->add_option("--workers", workers, "Worker threads (0: hardware concurrency)");

  auto* validate = app.add_subcommand("validate", "Check a configuration without running it");
  validate->add_option("--config", config, "INI configuration")->required()->check(CLI::ExistingFile);
  validate->add_option("--override", overrides, "section.key=value, applied after the file");

  std::string benchmark, eta_text, out;
  std::size_t points = 1001;
  auto* oracle = app.add_subcommand("oracle", "Forward-solve a benchmark at given parameters");
  oracle->add_option("benchmark", benchmark, "Benchmark name")->required();
  oracle->add_option("--eta", eta_text, "Comma-separated parameters")->required();
  oracle->add_option("--out", out, "Output CSV (x, t, component, value)")->required();
  oracle->add_option("--points", points, "Probe points per time slice (ODE: on [0, T])");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*validate) {
      const auto c = pinnverse::load_config(config, overrides);
      std::cout << "ok: " << c.benchmark << ", " << pinnverse::grid_cells(c).size() << " cells x " << c.methods.size()
                << " methods\n";
      return kOk;
    }
    if (*run) {
      const auto c = pinnverse::load_config(config, overrides);
      if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
      const auto summary = pinnverse::run_experiment(c, workers, &std::clog);
      std::cout << summary.rows << " rows written to " << (c.output / "results.csv").string();
      if (summary.failed) std::cout << " (" << summary.failed << " not ok)";
      std::cout << '\n';
      return kOk;
    }
    const auto& names = pinnverse::benchmark_names();
    if (std::find(names.begin(), names.end(), benchmark) == names.end())
      throw pinnverse::ConfigError("unknown benchmark '" + benchmark + "'");
    const auto problem = pinnverse::make_problem(benchmark);
    const auto eta = parse_eta(eta_text);
    if (eta.size() != problem->spec().eta_true.size())
      throw pinnverse::ConfigError("--eta: " + benchmark + " takes " + std::to_string(problem->spec().eta_true.size()) +
                                   " parameters");
    if (points < 2) throw pinnverse::ConfigError("--points must be at least 2");
    const auto probe = pinnverse::probe_points(*problem, points);
    pinnverse::write_trajectory(out, probe, pinnverse::solve_on_points(*problem, eta, probe));
    return kOk;
  } catch (const pinnverse::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const pinnverse::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}
