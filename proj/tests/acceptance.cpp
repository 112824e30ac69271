// Acceptance checks, one PASS/FAIL line per criterion.
//
//   acceptance [criterion...]     (default: all of 1-10)
//
// Training criteria load their settings from configs/acceptance/*.ini, so the
// same runs can be reproduced with `pinnverse run --config ...`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "pinnverse/experiment.hpp"
#include "support/gradient_check.hpp"

using namespace pinnverse;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

ExperimentConfig acceptance_config(const std::string& name) {
  return load_config(std::filesystem::path(PINNVERSE_CONFIG_DIR) / "acceptance" / name);
}

// Trained runs are shared between criteria.
struct NetworkRun {
  TrainResult result;
  double mu = 0.0;
  double beta = 0.0;
};

std::map<std::string, NetworkRun> g_runs;

const NetworkRun& network_run(const std::string& config, double zeta, double xi, Method method) {
  std::ostringstream key;
  key << config << '|' << zeta << '|' << xi << '|' << static_cast<int>(method);
  if (auto it = g_runs.find(key.str()); it != g_runs.end()) return it->second;
  const ExperimentConfig c = acceptance_config(config);
  CellContext ctx = prepare_cell(c, {zeta, xi, 0});
  NetworkRun run;
  const auto t0 = std::chrono::steady_clock::now();
  run.result = train_cell(c, ctx, method);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Problem& problem = *ctx.problem;
  run.beta = beta(problem.spec().eta_true, run.result.eta_est);
  run.mu = network_mu(problem, ctx.evaluator->network(), run.result.params, c.probe_points, c.solve);
  std::cout << "  [" << config << " " << (method == Method::PinnVerse ? "pinnverse" : "pinn") << " zeta=" << zeta
            << " xi=" << xi << "] " << to_string(run.result.status) << ", beta " << fmt(run.beta) << ", mu "
            << fmt(run.mu) << ", L_de " << fmt(run.result.final_loss.de) << ", " << fmt(secs) << " s" << std::endl;
  return g_runs.emplace(key.str(), std::move(run)).first->second;
}

Outcome criterion1() {
  std::size_t failures = 0, checked = 0;
  double worst = 0.0;
  std::string first;
  for (const auto& name : benchmark_names()) {
    const auto problem = make_problem(name);
    const auto& s = problem->spec();
    const CollocationCounts counts = s.is_pde() ? CollocationCounts{48, 12, 12, 1} : CollocationCounts{48, 1, 0, 1};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Dataset d = generate_dataset(*problem, s.eta_true, 0.05, 100 + seed);
      const LossEvaluator ev(*problem, problem->network_spec(), build_collocation(s, counts), d, s.data_loss);
      std::vector<double> eta = s.eta_true;
      for (double& e : eta) e *= 1.0 + 0.1 * static_cast<double>(seed);
      for (const auto& g : testsupport::check_loss_gradients(ev, init_params(ev.network(), seed), eta)) {
        failures += g.failures;
        checked += g.checked;
        worst = std::max(worst, g.worst_relative);
        if (first.empty() && !g.first_failure.empty()) first = name + ": " + g.first_failure;
      }
    }
  }
  return {failures == 0, std::to_string(checked) + " derivatives, worst relative error " + fmt(worst) +
                             (first.empty() ? "" : ", first failure " + first)};
}

double fisher_front(const ReferenceSolution& sol, std::size_t k) {
  const auto& g = sol.grid;
  for (std::size_t i = g.size() - 1; i > 0; --i) {
    const double a = sol.at(k, 0, g[i - 1]), b = sol.at(k, 0, g[i]);
    if (a >= 0.5 && b < 0.5) return g[i - 1] + (a - 0.5) / (a - b) * (g[i] - g[i - 1]);
  }
  return std::nan("");
}

Outcome criterion2() {
  const auto reaction = make_problem("reaction");
  std::vector<double> times;
  for (int i = 0; i <= 1000; ++i) times.push_back(0.01 * i);
  const auto sol = reaction->solve(reaction->spec().eta_true, times);
  double cons = 0.0;
  for (const auto& y : sol.states)
    cons = std::max({cons, std::abs(y[0] + y[1] - 1.0), std::abs(y[0] + y[2] + y[3] - 1.2)});

  const auto burgers = make_problem("burgers");
  const auto bs = burgers->solve(burgers->spec().eta_true, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5});
  double odd = 0.0;
  const auto n = static_cast<Eigen::Index>(bs.grid.size());
  for (const auto& y : bs.states)
    for (Eigen::Index i = 0; i < n; ++i) odd = std::max(odd, std::abs(y[i] + y[n - 1 - i]));

  // Wider domain and a late window: the front needs time to settle and room to travel.
  const auto fisher = make_problem("fisher");
  SolveOptions opt;
  opt.space = Interval{0.0, 40.0};
  opt.mesh_nodes = 4001;
  const auto fs = fisher->solve(fisher->spec().eta_true, std::vector<double>{8.0, 16.0}, opt);
  const double speed = (fisher_front(fs, 1) - fisher_front(fs, 0)) / 8.0;
  const double expected = 2.0 * std::sqrt(fisher->spec().eta_true[0] * fisher->spec().eta_true[1]);
  const double speed_err = std::abs(speed - expected) / expected;
  return {cons < 1e-8 && odd < 1e-8 && speed_err < 0.10,
          "conservation " + fmt(cons) + ", odd symmetry " + fmt(odd) + ", front speed " + fmt(speed) + " vs " +
              fmt(expected)};
}

Outcome criterion3() {
  const LagrangianFn f = [](std::span<const double> p, const MultiplierState& m) {
    const double x = p[0], y = p[1], g = x + y - 1.0;
    LagrangianEval e;
    e.value = x * x + y * y + m.lambda[0] * g + 0.5 * m.c[0] * g * g;
    const double dg = m.lambda[0] + m.c[0] * g;
    e.gradient = {2 * x + dg, 2 * y + dg};
    e.constraints = {g};
    return e;
  };
  std::vector<double> p{0.0, 0.0};
  AdanState adan(2);
  MultiplierState m(1, 0);
  // The training schedule: 1e-2 decaying to 1e-4.
  const std::size_t epochs = 20000;
  const LearningRateSchedule schedule;
  for (std::size_t k = 0; k < epochs; ++k)
    if (mdmm_step(p, adan, m, schedule(k, epochs), f) != StepStatus::Accepted) return {false, "step rejected"};
  const double err = std::max(std::abs(p[0] - 0.5), std::abs(p[1] - 0.5));
  return {err < 1e-4, "(" + fmt(p[0]) + ", " + fmt(p[1]) + "), lambda " + fmt(m.lambda[0])};
}

Outcome criterion4() {
  const auto& r = network_run("c4_reaction_noise_free.ini", 0.0, 0.75, Method::PinnVerse);
  return {r.result.status == TrainStatus::Completed && r.beta < 0.05, "beta " + fmt(r.beta)};
}

Outcome criterion5() {
  const auto& v = network_run("c5_reaction_noisy.ini", 0.25, 0.75, Method::PinnVerse);
  const auto& p = network_run("c5_reaction_noisy.ini", 0.25, 0.75, Method::Pinn);
  return {v.mu < p.mu && v.result.final_loss.de < p.result.final_loss.de,
          "mu " + fmt(v.mu) + " vs " + fmt(p.mu) + ", L_de " + fmt(v.result.final_loss.de) + " vs " +
              fmt(p.result.final_loss.de)};
}

std::vector<double> de_history(const TrainResult& r) {
  std::vector<double> l;
  for (const auto& e : r.log) l.push_back(e.loss.de);
  return l;
}

Outcome criterion6() {
  const auto& v = network_run("c5_reaction_noisy.ini", 0.25, 0.75, Method::PinnVerse);
  const auto& p = network_run("c5_reaction_noisy.ini", 0.25, 0.75, Method::Pinn);
  const auto fv = fit_power_law(de_history(v.result), 1000);
  const auto fp = fit_power_law(de_history(p.result), 1000);
  return {fv.a > 0.8, "a " + fmt(fv.a) + " +- " + fmt(fv.std_error) + " (pinn: " + fmt(fp.a) + ")"};
}

Outcome criterion7() {
  const ExperimentConfig c = acceptance_config("c7_reaction_nelder_mead.ini");
  const auto nm_beta = [&](double xi) {
    const CellContext ctx = prepare_cell(c, {0.05, xi, 0});
    return beta(ctx.problem->spec().eta_true, fit_cell(c, ctx).x);
  };
  const double near = nm_beta(0.25), far = nm_beta(5.0);
  const auto& v = network_run("c7_reaction_nelder_mead.ini", 0.05, 5.0, Method::PinnVerse);
  return {near < 0.05 && far > v.beta,
          "nelder-mead beta " + fmt(near) + " (xi 0.25), " + fmt(far) + " (xi 5) vs pinnverse " + fmt(v.beta)};
}

Outcome criterion8() {
  if (g_runs.empty()) return {false, "no PINNverse runs in this invocation"};
  std::size_t runs = 0;
  double worst_v = 0.0, worst_out = 0.0;
  for (const auto& [key, run] : g_runs) {
    if (run.result.method != Method::PinnVerse) continue;
    ++runs;
    for (double v : run.result.infeasibility) worst_v = std::max(worst_v, std::abs(v));
    const auto problem = make_problem(key.find("burgers") != std::string::npos ? "burgers" : "reaction");
    const auto& s = problem->spec();
    for (std::size_t j = 0; j < run.result.eta_est.size(); ++j) {
      worst_out = std::max(worst_out, s.eta_lower[j] - run.result.eta_est[j]);
      worst_out = std::max(worst_out, run.result.eta_est[j] - s.eta_upper[j]);
    }
  }
  if (runs == 0) return {false, "no PINNverse runs in this invocation"};
  return {worst_v < 1e-4 && worst_out <= 1e-4,
          std::to_string(runs) + " runs, max |V| " + fmt(worst_v) + ", max bound excess " + fmt(std::max(0.0, worst_out))};
}

bool same_result(const TrainResult& a, const TrainResult& b) {
  if (a.params.flatten() != b.params.flatten() || a.eta_est != b.eta_est || a.log.size() != b.log.size()) return false;
  for (std::size_t k = 0; k < a.log.size(); ++k) {
    const auto &x = a.log[k], &y = b.log[k];
    if (x.loss.data != y.loss.data || x.loss.de != y.loss.de || x.loss.ic != y.loss.ic || x.loss.bc != y.loss.bc ||
        x.eta != y.eta || x.lambda != y.lambda || x.chi != y.chi)
      return false;
  }
  return true;
}

std::vector<std::string> results_without_runtime(const std::filesystem::path& csv) {
  std::ifstream is(csv);
  std::vector<std::string> rows;
  for (std::string line; std::getline(is, line);) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    if (f.size() > 8) f[8].clear();
    std::string joined;
    for (const auto& x : f) joined += x + ',';
    rows.push_back(joined);
  }
  return rows;
}

Outcome criterion9() {
  std::vector<std::string> broken;
  // Shortened network runs from each training criterion's configuration.
  const std::vector<std::tuple<std::string, double, double, std::size_t>> runs{
      {"c4_reaction_noise_free.ini", 0.0, 0.75, 2000},
      {"c5_reaction_noisy.ini", 0.25, 0.75, 2000},
      {"c10_burgers.ini", 0.0, 0.75, 200}};
  for (const auto& [config, zeta, xi, epochs] : runs) {
    for (Method m : {Method::PinnVerse, Method::Pinn}) {
      ExperimentConfig c = acceptance_config(config);
      c.epochs = epochs;
      CellContext a = prepare_cell(c, {zeta, xi, 0}), b = prepare_cell(c, {zeta, xi, 0});
      if (!same_result(train_cell(c, a, m), train_cell(c, b, m))) broken.push_back(config);
    }
  }
  // Nelder-Mead at full budget.
  const ExperimentConfig c7 = acceptance_config("c7_reaction_nelder_mead.ini");
  for (double xi : c7.xi) {
    const CellContext a = prepare_cell(c7, {0.05, xi, 0}), b = prepare_cell(c7, {0.05, xi, 0});
    const auto ra = fit_cell(c7, a), rb = fit_cell(c7, b);
    if (ra.x != rb.x || ra.best_history != rb.best_history) broken.push_back("nelder-mead xi " + fmt(xi));
  }
  // The batch runner end to end, single- and multi-threaded.
  ExperimentConfig batch = acceptance_config("c7_reaction_nelder_mead.ini");
  batch.epochs = 300;
  const auto dir = std::filesystem::temp_directory_path() / ("pinnverse_acceptance_" + std::to_string(::getpid()));
  batch.output = dir / "a";
  run_experiment(batch, 1);
  batch.output = dir / "b";
  run_experiment(batch, 2);
  if (results_without_runtime(dir / "a" / "results.csv") != results_without_runtime(dir / "b" / "results.csv"))
    broken.push_back("results.csv");
  std::filesystem::remove_all(dir);
  std::string detail = "7 network reruns, 2 nelder-mead reruns, batch rerun";
  for (const auto& b : broken) detail += "; differs: " + b;
  return {broken.empty(), detail};
}

Outcome criterion10() {
  const auto& r = network_run("c10_burgers.ini", 0.0, 0.75, Method::PinnVerse);
  const double nu = make_problem("burgers")->spec().eta_true[0];
  const double rel = std::abs(r.result.eta_est[0] - nu) / nu;
  return {r.result.status == TrainStatus::Completed && rel < 0.25 && r.mu < 0.1,
          "nu " + fmt(r.result.eta_est[0]) + " (relative error " + fmt(rel) + "), mu " + fmt(r.mu)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
      {1, {"gradient correctness", criterion1}},
      {2, {"forward-solver oracles", criterion2}},
      {3, {"MDMM toy convergence", criterion3}},
      {4, {"noise-free reaction recovery", criterion4}},
      {5, {"overfitting separation", criterion5}},
      {6, {"convergence-rate exponent", criterion6}},
      {7, {"Nelder-Mead near and far starts", criterion7}},
      {8, {"bound satisfaction", criterion8}},
      {9, {"determinism", criterion9}},
      {10, {"Burgers desk check", criterion10}},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  if (selected.empty())
    for (const auto& [id, c] : criteria) selected.insert(id);
  // Criterion 8 inspects the runs made by the others, so it goes after them.
  std::vector<int> order;
  for (int id : selected)
    if (id != 8 && id != 9) order.push_back(id);
  for (int id : {8, 9})
    if (selected.count(id)) order.push_back(id);

  int failed = 0;
  for (int id : order) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cout << "FAIL criterion " << id << ": unknown criterion" << std::endl;
      ++failed;
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << it->second.first << "): " << o.detail
              << " [" << fmt(secs) << " s]" << std::endl;
    if (!o.pass) ++failed;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << std::endl;
  return failed ? 1 : 0;
}
