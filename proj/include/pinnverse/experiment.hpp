#pragma once

// Batch experiments: INI configuration, the (zeta, xi, replicate) x method
// grid, and the CSV/JSON artifacts written for every cell.
//
// Needs Boost.PropertyTree (headers only) and nlohmann/json.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pinnverse/baselines.hpp"
#include "pinnverse/constrained_optimizer.hpp"
#include "pinnverse/dataset.hpp"
#include "pinnverse/error.hpp"
#include "pinnverse/losses.hpp"
#include "pinnverse/metrics.hpp"
#include "pinnverse/problems.hpp"
#include "pinnverse/sampling.hpp"

namespace pinnverse {

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"pinnverse", "pinn", "nelder-mead"};
  return names;
}

struct ExperimentConfig {
  std::string benchmark;
  std::vector<std::string> methods{"pinnverse", "pinn", "nelder-mead"};
  std::vector<double> zeta{0.0, 0.05, 0.15, 0.25, 0.30};
  std::vector<double> xi{0.25, 0.75, 1.50, 5.00};
  std::size_t replicates = 1;
  std::size_t epochs = 0;  // 0: benchmark default
  std::filesystem::path output = "results";
  std::optional<std::pair<double, double>> highlight;  // (zeta, xi)
  std::size_t probe_points = 1001;

  std::optional<CollocationCounts> counts;  // unset: benchmark default
  int hidden_layers = 2;
  int hidden_width = 20;
  std::optional<int> fourier_frequencies;  // unset: 10 where the benchmark uses them

  TrainConfig train;
  NelderMeadOptions nelder_mead;
  SolveOptions solve;

  /// Throws ConfigError on any inconsistency.
  void validate() const;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + v + "' is not a number");
  }
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (!(d >= 0.0) || d != std::floor(d) || d > 1e15) throw ConfigError(key + ": '" + v + "' is not a nonnegative integer");
  return static_cast<std::size_t>(d);
}

inline std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(parse_double(key, item));
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Short label for file names: 0.25 -> "0.25".
inline std::string label(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

/// Dataset seed of one grid cell; every method in the cell sees the same data.
inline std::uint64_t cell_seed(const std::string& benchmark, double zeta, double xi, std::size_t replicate) {
  return detail::fnv1a(benchmark + '|' + detail::format_double(zeta) + '|' + detail::format_double(xi) + '|' +
                       std::to_string(replicate));
}

/// Network initialisation seed of one grid cell, shared by both network methods.
inline std::uint64_t cell_init_seed(const std::string& benchmark, double zeta, double xi, std::size_t replicate) {
  return detail::fnv1a(std::to_string(cell_seed(benchmark, zeta, xi, replicate)) + "|init");
}

/// Applies one `section.key = value` setting.
inline void apply_setting(ExperimentConfig& c, const std::string& section, const std::string& key,
                          const std::string& raw) {
  using namespace detail;
  const std::string v = trim(raw);
  const std::string name = section + "." + key;
  const auto num = [&] { return parse_double(name, v); };
  const auto count = [&] { return parse_count(name, v); };
  const auto counts = [&]() -> CollocationCounts& {
    if (!c.counts) {
      if (c.benchmark.empty()) throw ConfigError(name + ": set experiment.benchmark before collocation counts");
      c.counts = make_problem(c.benchmark)->spec().default_counts;
    }
    return *c.counts;
  };

  if (section == "experiment") {
    if (key == "benchmark") {
      const auto& names = benchmark_names();
      if (std::find(names.begin(), names.end(), v) == names.end()) throw ConfigError(name + ": unknown benchmark '" + v + "'");
      c.benchmark = v;
    } else if (key == "methods") {
      c.methods = split_list(v);
    } else if (key == "zeta") {
      c.zeta = parse_doubles(name, v);
    } else if (key == "xi") {
      c.xi = parse_doubles(name, v);
    } else if (key == "replicates") {
      c.replicates = count();
    } else if (key == "epochs") {
      c.epochs = count();
    } else if (key == "output") {
      c.output = v;
    } else if (key == "highlight") {
      if (v == "none" || v.empty()) {
        c.highlight.reset();
      } else {
        const auto h = parse_doubles(name, v);
        if (h.size() != 2) throw ConfigError(name + ": expected 'zeta, xi'");
        c.highlight = std::make_pair(h[0], h[1]);
      }
    } else if (key == "probe_points") {
      c.probe_points = count();
    } else {
      throw ConfigError("unknown key '" + name + "'");
    }
  } else if (section == "collocation") {
    if (key == "interior") counts().interior = count();
    else if (key == "initial") counts().initial = count();
    else if (key == "boundary") counts().boundary = count();
    else if (key == "skip") counts().skip = count();
    else throw ConfigError("unknown key '" + name + "'");
  } else if (section == "network") {
    if (key == "hidden_layers") c.hidden_layers = static_cast<int>(count());
    else if (key == "hidden_width") c.hidden_width = static_cast<int>(count());
    else if (key == "fourier_frequencies") c.fourier_frequencies = static_cast<int>(count());
    else throw ConfigError("unknown key '" + name + "'");
  } else if (section == "optimizer") {
    auto& t = c.train;
    if (key == "lr_initial") t.schedule.initial = num();
    else if (key == "lr_final") t.schedule.floor = num();
    else if (key == "lr_hold") t.schedule.hold = count();
    else if (key == "beta1") t.adan.beta1 = num();
    else if (key == "beta2") t.adan.beta2 = num();
    else if (key == "beta3") t.adan.beta3 = num();
    else if (key == "epsilon") t.adan.epsilon = num();
    else if (key == "weight_decay") t.adan.weight_decay = num();
    else if (key == "penalty_c") t.penalty_c = num();
    else if (key == "penalty_d") t.penalty_d = num();
    else if (key == "divergence_threshold") t.divergence_threshold = num();
    else if (key == "max_rejections") t.max_rejections = count();
    else throw ConfigError("unknown key '" + name + "'");
  } else if (section == "nelder_mead") {
    if (key == "xatol") c.nelder_mead.xatol = num();
    else if (key == "fatol") c.nelder_mead.fatol = num();
    else if (key == "max_iterations") c.nelder_mead.max_iterations = count();
    else throw ConfigError("unknown key '" + name + "'");
  } else if (section == "solver") {
    if (key == "rtol") c.solve.rtol = num();
    else if (key == "atol") c.solve.atol = num();
    else if (key == "mesh_nodes") c.solve.mesh_nodes = count();
    else throw ConfigError("unknown key '" + name + "'");
  } else {
    throw ConfigError("unknown section '" + section + "'");
  }
}

/// Applies a `section.key=value` override.
inline void apply_override(ExperimentConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  apply_setting(c, detail::trim(assignment.substr(0, dot)), detail::trim(assignment.substr(dot + 1, eq - dot - 1)),
                assignment.substr(eq + 1));
}

inline ExperimentConfig parse_config(std::istream& is, const std::vector<std::string>& overrides = {}) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  ExperimentConfig c;
  // The benchmark decides several defaults, so it is applied first.
  if (auto b = tree.get_optional<std::string>("experiment.benchmark")) apply_setting(c, "experiment", "benchmark", *b);
  for (const auto& o : overrides)
    if (o.rfind("experiment.benchmark", 0) == 0) apply_override(c, o);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' is outside any section");
    for (const auto& [key, value] : body) {
      if (section == "experiment" && key == "benchmark") continue;
      apply_setting(c, section, key, value.data());
    }
  }
  for (const auto& o : overrides) apply_override(c, o);
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config '" + path.string() + "'");
  return parse_config(is, overrides);
}

inline void ExperimentConfig::validate() const {
  if (benchmark.empty()) throw ConfigError("experiment.benchmark is required");
  const auto problem = make_problem(benchmark);
  const ProblemSpec& s = problem->spec();
  if (methods.empty()) throw ConfigError("experiment.methods must name at least one method");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    const auto& names = method_names();
    if (std::find(names.begin(), names.end(), m) == names.end())
      throw ConfigError("experiment.methods: unknown method '" + m + "' (expected pinnverse, pinn or nelder-mead)");
    if (!seen.insert(m).second) throw ConfigError("experiment.methods: '" + m + "' listed twice");
  }
  if (zeta.empty() || xi.empty()) throw ConfigError("experiment.zeta and experiment.xi must be non-empty");
  for (double z : zeta)
    if (!(z >= 0.0 && z <= 0.3)) throw ConfigError("experiment.zeta: " + detail::format_double(z) + " outside [0, 0.3]");
  for (double x : xi)
    if (!(x >= 0.0 && x <= 5.0)) throw ConfigError("experiment.xi: " + detail::format_double(x) + " outside [0, 5]");
  if (replicates == 0) throw ConfigError("experiment.replicates must be positive");
  if (probe_points < 2) throw ConfigError("experiment.probe_points must be at least 2");
  if (highlight) {
    const bool in_grid = std::find(zeta.begin(), zeta.end(), highlight->first) != zeta.end() &&
                         std::find(xi.begin(), xi.end(), highlight->second) != xi.end();
    if (!in_grid) throw ConfigError("experiment.highlight must be a (zeta, xi) pair from the grid");
  }
  const CollocationCounts cc = counts.value_or(s.default_counts);
  if (cc.interior == 0) throw ConfigError("collocation.interior must be positive");
  if (cc.initial == 0) throw ConfigError("collocation.initial must be positive");
  if (s.is_pde() && (cc.boundary == 0 || cc.boundary % 2 != 0))
    throw ConfigError("collocation.boundary must be a positive even number for " + s.name);
  if (!s.is_pde() && cc.boundary != 0) throw ConfigError("collocation.boundary must be 0 for " + s.name);
  if (hidden_layers < 1 || hidden_width < 1) throw ConfigError("network: hidden_layers and hidden_width must be positive");
  if (fourier_frequencies && *fourier_frequencies > 0 && !s.fourier_features)
    throw ConfigError("network.fourier_frequencies: " + s.name + " does not use Fourier features");
  if (!(train.schedule.initial > 0.0) || !(train.schedule.floor > 0.0)) throw ConfigError("optimizer: learning rates must be positive");
  if (!(train.penalty_c > 0.0) || !(train.penalty_d > 0.0)) throw ConfigError("optimizer: penalties must be positive");
  if (!(train.divergence_threshold > 0.0)) throw ConfigError("optimizer.divergence_threshold must be positive");
  if (train.max_rejections == 0) throw ConfigError("optimizer.max_rejections must be positive");
  try {
    train.adan.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("optimizer: ") + e.what());
  }
  if (!(solve.rtol > 0.0) || !(solve.atol > 0.0)) throw ConfigError("solver: tolerances must be positive");
}

// ---------------------------------------------------------------------------
// Artifacts

struct ScenarioResult {
  std::string method;
  double zeta = 0.0, xi = 0.0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  double beta = 0.0, gamma_abs = 0.0, gamma_rel = 0.0, mu = 0.0;
  double runtime_s = 0.0;
  std::string status = "ok";
};

inline const char* results_header() { return "method,zeta,xi,seed,beta,gamma_abs,gamma_rel,mu,runtime_s,status"; }

inline std::string results_row(const ScenarioResult& r) {
  using detail::format_double;
  std::ostringstream os;
  os << r.method << ',' << format_double(r.zeta) << ',' << format_double(r.xi) << ',' << r.seed << ','
     << format_double(r.beta) << ',' << format_double(r.gamma_abs) << ',' << format_double(r.gamma_rel) << ','
     << format_double(r.mu) << ',' << std::fixed << std::setprecision(3) << r.runtime_s << ',' << r.status;
  return os.str();
}

/// Rows (x, t, component, value) for values laid out components x points.
inline void write_trajectory(const std::filesystem::path& path, std::span<const SpaceTimePoint> pts,
                             const Eigen::MatrixXd& values) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  os << "x,t,component,value\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < values.cols(); ++i)
    for (Eigen::Index c = 0; c < values.rows(); ++c)
      os << pts[static_cast<std::size_t>(i)].x << ',' << pts[static_cast<std::size_t>(i)].t << ',' << c << ','
         << values(c, i) << '\n';
}

inline void write_observations(const std::filesystem::path& path, const Dataset& d) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  os << "x,t,component,value\n" << std::setprecision(17);
  for (const auto& o : d.observations) os << o.x << ',' << o.t << ',' << o.component << ',' << o.value << '\n';
}

/// Per-epoch loss, learning rate, parameters and multipliers.
inline void write_loss_log(const std::filesystem::path& path, const TrainResult& r, const ProblemSpec& s) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  os << "epoch,L_data,L_de,L_ic,L_bc,alpha";
  for (const auto& n : s.param_names) os << ",eta_" << n;
  if (!r.log.empty()) {
    static const char* eq[] = {"lambda_de", "lambda_ic", "lambda_bc"};
    for (std::size_t i = 0; i < r.log[0].lambda.size(); ++i) os << ',' << eq[i];
    for (std::size_t j = 0; j < r.log[0].chi.size(); ++j) os << ",chi_" << s.param_names[j];
  }
  os << '\n' << std::setprecision(17);
  for (const auto& e : r.log) {
    os << e.epoch << ',' << e.loss.data << ',' << e.loss.de << ',' << e.loss.ic << ',' << e.loss.bc << ',' << e.alpha;
    for (double v : e.eta) os << ',' << v;
    for (double v : e.lambda) os << ',' << v;
    for (double v : e.chi) os << ',' << v;
    os << '\n';
  }
}

inline nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json json_numbers(std::span<const double> v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

// ---------------------------------------------------------------------------
// Running

struct Cell {
  double zeta = 0.0, xi = 0.0;
  std::size_t replicate = 0;
};

inline std::vector<Cell> grid_cells(const ExperimentConfig& c) {
  std::vector<Cell> cells;
  for (double z : c.zeta)
    for (double x : c.xi)
      for (std::size_t r = 0; r < c.replicates; ++r) cells.push_back({z, x, r});
  return cells;
}

inline NetworkSpec experiment_network(const ExperimentConfig& c, const Problem& problem) {
  return problem.network_spec(c.hidden_layers, c.hidden_width, c.fourier_frequencies.value_or(10));
}

/// Everything a cell's methods share: one dataset, one init seed, one
/// collocation set.
struct CellContext {
  std::unique_ptr<Problem> problem;
  Cell cell;
  std::uint64_t seed = 0;
  std::uint64_t init_seed = 0;
  Dataset data;
  std::optional<LossEvaluator> evaluator;  // built on first use
};

inline CellContext prepare_cell(const ExperimentConfig& c, const Cell& cell) {
  CellContext ctx;
  ctx.problem = make_problem(c.benchmark);
  ctx.cell = cell;
  ctx.seed = cell_seed(c.benchmark, cell.zeta, cell.xi, cell.replicate);
  ctx.init_seed = cell_init_seed(c.benchmark, cell.zeta, cell.xi, cell.replicate);
  ctx.data = generate_dataset(*ctx.problem, ctx.problem->spec().eta_true, cell.zeta, ctx.seed, c.solve);
  return ctx;
}

inline const LossEvaluator& cell_evaluator(const ExperimentConfig& c, CellContext& ctx) {
  if (!ctx.evaluator) {
    const ProblemSpec& s = ctx.problem->spec();
    ctx.evaluator.emplace(*ctx.problem, experiment_network(c, *ctx.problem),
                          build_collocation(s, c.counts.value_or(s.default_counts)), ctx.data, s.data_loss);
  }
  return *ctx.evaluator;
}

inline TrainConfig cell_train_config(const ExperimentConfig& c, const CellContext& ctx) {
  TrainConfig tc = c.train;
  tc.epochs = c.epochs ? c.epochs : ctx.problem->spec().default_epochs;
  tc.xi = ctx.cell.xi;
  tc.init_seed = ctx.init_seed;
  return tc;
}

/// Trains the pinnverse or pinn method on the cell.
inline TrainResult train_cell(const ExperimentConfig& c, CellContext& ctx, Method method) {
  const LossEvaluator& ev = cell_evaluator(c, ctx);
  const TrainConfig tc = cell_train_config(c, ctx);
  const auto& truth = ctx.problem->spec().eta_true;
  return method == Method::PinnVerse ? train_pinnverse(ev, truth, tc) : train_pinn(ev, truth, tc);
}

/// Nelder-Mead over the forward solver from (1 + xi) * eta_true.
inline NelderMeadResult fit_cell(const ExperimentConfig& c, const CellContext& ctx) {
  const ProblemSpec& s = ctx.problem->spec();
  std::vector<double> start;
  for (double e : s.eta_true) start.push_back((1.0 + ctx.cell.xi) * e);
  return nelder_mead(forward_objective(*ctx.problem, ctx.data, s.data_loss, c.solve), start, s.eta_lower, s.eta_upper,
                     c.nelder_mead);
}

/// Runs every method on one cell. `artifacts` (may be empty) receives the
/// detailed trajectory exports.
inline std::vector<ScenarioResult> run_cell(const ExperimentConfig& c, const Cell& cell,
                                            const std::filesystem::path& artifacts, std::ostream* log = nullptr) {
  CellContext ctx = prepare_cell(c, cell);
  const Problem* problem = ctx.problem.get();
  const ProblemSpec& s = problem->spec();
  const std::uint64_t seed = ctx.seed;
  const Dataset& data = ctx.data;
  const auto probe = probe_points(*problem, c.probe_points);
  const Eigen::MatrixXd reference = solve_on_points(*problem, s.eta_true, probe, c.solve);
  const std::string tag = "z" + detail::label(cell.zeta) + "_x" + detail::label(cell.xi) + "_r" + std::to_string(cell.replicate);
  const std::filesystem::path runs = c.output / "runs";

  if (!artifacts.empty()) {
    write_observations(artifacts / "data.csv", data);
    write_trajectory(artifacts / "reference.csv", probe, reference);
  }

  std::vector<ScenarioResult> rows;
  for (const std::string& method : c.methods) {
    ScenarioResult row;
    row.method = method;
    row.zeta = cell.zeta;
    row.xi = cell.xi;
    row.replicate = cell.replicate;
    row.seed = seed;
    nlohmann::json j;
    j["method"] = method;
    j["benchmark"] = s.name;
    j["zeta"] = cell.zeta;
    j["xi"] = cell.xi;
    j["replicate"] = cell.replicate;
    j["seed"] = seed;
    j["eta_true"] = s.eta_true;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> eta_est;
    try {
      if (method == "nelder-mead") {
        const auto nm = fit_cell(c, ctx);
        eta_est = nm.x;
        j["objective"] = json_number(nm.value);
        j["iterations"] = nm.iterations;
        j["evaluations"] = nm.evaluations;
        j["converged"] = nm.converged;
        row.mu = mu(solve_on_points(*problem, eta_est, probe, c.solve), reference);
        if (!artifacts.empty()) {
          std::ofstream h(artifacts / (method + "_history.csv"));
          h << "iteration,best_objective\n" << std::setprecision(17);
          for (std::size_t k = 0; k < nm.best_history.size(); ++k) h << k + 1 << ',' << nm.best_history[k] << '\n';
        }
      } else {
        const TrainResult r = train_cell(c, ctx, method == "pinnverse" ? Method::PinnVerse : Method::Pinn);
        const TrainConfig tc = cell_train_config(c, ctx);
        eta_est = r.eta_est;
        row.status = std::string(to_string(r.status));
        j["init_seed"] = ctx.init_seed;
        j["epochs"] = tc.epochs;
        j["epochs_run"] = r.epochs_run;
        j["final_losses"] = {{"data", json_number(r.final_loss.data)}, {"de", json_number(r.final_loss.de)},
                             {"ic", json_number(r.final_loss.ic)}, {"bc", json_number(r.final_loss.bc)}};
        j["multipliers"] = {{"lambda", json_numbers(r.multipliers.lambda)}, {"chi", json_numbers(r.multipliers.chi)}};
        j["infeasibility"] = json_numbers(r.infeasibility);
        if (!r.message.empty()) j["message"] = r.message;
        const Eigen::MatrixXd nn = predict(ctx.evaluator->network(), r.params, probe);
        row.mu = mu(nn, reference);
        if (!artifacts.empty()) {
          write_loss_log(artifacts / (method + "_losses.csv"), r, s);
          write_trajectory(artifacts / (method + "_nn.csv"), probe, nn);
        }
      }
      row.beta = beta(s.eta_true, eta_est);
      try {
        const GammaPair g = forward_gamma(*problem, data, eta_est, c.solve);
        row.gamma_abs = g.abs;
        row.gamma_rel = g.rel;
        if (!artifacts.empty())
          write_trajectory(artifacts / (method + "_estimated.csv"), probe, solve_on_points(*problem, eta_est, probe, c.solve));
      } catch (const SolverError& e) {
        row.gamma_abs = row.gamma_rel = std::numeric_limits<double>::quiet_NaN();
        j["gamma_error"] = e.what();
      }
    } catch (const std::exception& e) {
      row.status = "error";
      row.beta = row.gamma_abs = row.gamma_rel = row.mu = std::numeric_limits<double>::quiet_NaN();
      j["message"] = e.what();
      if (log) *log << "error: " << method << " " << tag << ": " << e.what() << '\n';
    }
    row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    j["status"] = row.status;
    j["eta_est"] = json_numbers(eta_est);
    j["beta"] = json_number(row.beta);
    j["gamma_abs"] = json_number(row.gamma_abs);
    j["gamma_rel"] = json_number(row.gamma_rel);
    j["mu"] = json_number(row.mu);
    j["runtime_s"] = row.runtime_s;
    std::ofstream js(runs / (method + "_" + tag + ".json"));
    js << j.dump(2) << '\n';
    rows.push_back(row);
  }
  return rows;
}

struct RunSummary {
  std::size_t rows = 0;
  std::size_t failed = 0;  // rows whose status is not "ok"
};

/// Runs the whole grid on `workers` threads. Rows reach results.csv in grid
/// order regardless of completion order.
inline RunSummary run_experiment(const ExperimentConfig& c, std::size_t workers = 1, std::ostream* log = nullptr) {
  c.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(c.output / "runs", ec);
  if (ec) throw Error("cannot create output directory '" + c.output.string() + "': " + ec.message());
  std::ofstream results(c.output / "results.csv");
  if (!results) throw Error("cannot write '" + (c.output / "results.csv").string() + "'");
  results << results_header() << '\n';
  results.flush();

  const auto cells = grid_cells(c);
  std::vector<std::optional<std::vector<ScenarioResult>>> done(cells.size());
  std::size_t next_to_write = 0;
  std::atomic<std::size_t> next_cell{0};
  std::mutex mu_out;
  RunSummary summary;
  std::exception_ptr fatal;

  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next_cell++;
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      fs::path artifacts;
      if (c.highlight && cell.replicate == 0 && cell.zeta == c.highlight->first && cell.xi == c.highlight->second) {
        artifacts = c.output / "highlight";
        fs::create_directories(artifacts);
      }
      std::vector<ScenarioResult> rows;
      try {
        rows = run_cell(c, cell, artifacts, log);
      } catch (...) {
        std::lock_guard lock(mu_out);
        if (!fatal) fatal = std::current_exception();
        return;
      }
      std::lock_guard lock(mu_out);
      done[i] = std::move(rows);
      if (log)
        *log << "cell " << i + 1 << "/" << cells.size() << " (zeta " << cell.zeta << ", xi " << cell.xi << ", replicate "
             << cell.replicate << ") done\n";
      while (next_to_write < cells.size() && done[next_to_write]) {
        for (const auto& r : *done[next_to_write]) {
          results << results_row(r) << '\n';
          ++summary.rows;
          if (r.status != "ok") ++summary.failed;
        }
        results.flush();
        ++next_to_write;
      }
    }
  };

  const std::size_t n = std::max<std::size_t>(1, std::min(workers, cells.size()));
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (fatal) std::rethrow_exception(fatal);
  return summary;
}

}  // namespace pinnverse
