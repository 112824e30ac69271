#pragma once

// Comparison methods: the unit-weight PINN with log-parameterised eta, and
// bounded Nelder-Mead over the forward solver's data misfit.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "pinnverse/constrained_optimizer.hpp"
#include "pinnverse/dataset.hpp"
#include "pinnverse/error.hpp"
#include "pinnverse/metrics.hpp"
#include "pinnverse/problems.hpp"

namespace pinnverse {

/// Weighted-sum PINN with eta = exp(phi); no bound handling.
inline TrainResult train_pinn(const LossEvaluator& ev, std::span<const double> eta_true, const TrainConfig& cfg) {
  const ProblemSpec& s = ev.problem().spec();
  return train(Method::Pinn, ev, eta_true, s.eta_lower, s.eta_upper, cfg);
}

using Objective = std::function<double(std::span<const double>)>;

struct NelderMeadOptions {
  double xatol = 1e-8;
  double fatol = 1e-8;
  std::size_t max_iterations = 0;  // 0: 400 per parameter
  std::size_t max_evaluations = 0;  // 0: 400 per parameter, unbounded if max_iterations is set
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<double> best_history;  // best vertex value after each iteration
};

/// Bounded simplex search. Empty bounds mean unbounded. Coefficients:
/// reflection 1, expansion 2, contraction 0.5, shrink 0.5.
inline NelderMeadResult nelder_mead(const Objective& f, std::span<const double> x0, std::span<const double> lower = {},
                                    std::span<const double> upper = {}, const NelderMeadOptions& opt = {}) {
  const std::size_t p = x0.size();
  if (p == 0) throw InvalidArgument("nelder_mead: empty start point");
  const bool bounded = !lower.empty() || !upper.empty();
  if (bounded && (lower.size() != p || upper.size() != p)) throw InvalidArgument("nelder_mead: bounds size mismatch");
  if (bounded)
    for (std::size_t j = 0; j < p; ++j)
      if (!(lower[j] <= upper[j]) || !std::isfinite(lower[j]) || !std::isfinite(upper[j]))
        throw InvalidArgument("nelder_mead: bounds must be finite and ordered");
  constexpr double rho = 1.0, chi = 2.0, psi = 0.5, sigma = 0.5;
  const std::size_t max_it = opt.max_iterations ? opt.max_iterations : 400 * p;
  // As in scipy: an explicit iteration cap alone leaves evaluations unbounded.
  const std::size_t max_ev = opt.max_evaluations  ? opt.max_evaluations
                             : opt.max_iterations ? std::numeric_limits<std::size_t>::max()
                                                  : max_it;

  NelderMeadResult res;
  using Point = std::vector<double>;
  const auto clip = [&](Point& x) {
    if (bounded)
      for (std::size_t j = 0; j < p; ++j) x[j] = std::clamp(x[j], lower[j], upper[j]);
  };
  const auto eval = [&](const Point& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<Point> sim(p + 1, Point(x0.begin(), x0.end()));
  for (std::size_t k = 0; k < p; ++k) sim[k + 1][k] = sim[k + 1][k] != 0.0 ? sim[k + 1][k] * 1.05 : 0.00025;
  for (auto& v : sim) clip(v);
  std::vector<double> fs(p + 1);
  for (std::size_t k = 0; k <= p; ++k) fs[k] = eval(sim[k]);

  const auto sort_simplex = [&] {
    std::vector<std::size_t> idx(p + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    std::vector<Point> s2;
    std::vector<double> f2;
    for (std::size_t i : idx) s2.push_back(sim[i]), f2.push_back(fs[i]);
    sim = std::move(s2);
    fs = std::move(f2);
  };
  sort_simplex();

  const auto combine = [&](const Point& xbar, const Point& xw, double a) {
    Point x(p);  // (1 + a) xbar - a xw
    for (std::size_t j = 0; j < p; ++j) x[j] = (1.0 + a) * xbar[j] - a * xw[j];
    clip(x);
    return x;
  };

  while (res.evaluations < max_ev && res.iterations < max_it) {
    double xspread = 0.0, fspread = 0.0;
    for (std::size_t k = 1; k <= p; ++k) {
      for (std::size_t j = 0; j < p; ++j) xspread = std::max(xspread, std::abs(sim[k][j] - sim[0][j]));
      fspread = std::max(fspread, std::abs(fs[0] - fs[k]));
    }
    if (xspread <= opt.xatol && fspread <= opt.fatol) {
      res.converged = true;
      break;
    }

    Point xbar(p, 0.0);
    for (std::size_t k = 0; k < p; ++k)
      for (std::size_t j = 0; j < p; ++j) xbar[j] += sim[k][j] / static_cast<double>(p);
    const Point& worst = sim[p];

    const Point xr = combine(xbar, worst, rho);
    const double fr = eval(xr);
    bool shrink = false;
    if (fr < fs[0]) {
      const Point xe = combine(xbar, worst, rho * chi);
      const double fe = eval(xe);
      if (fe < fr) {
        sim[p] = xe, fs[p] = fe;
      } else {
        sim[p] = xr, fs[p] = fr;
      }
    } else if (fr < fs[p - 1]) {
      sim[p] = xr, fs[p] = fr;
    } else if (fr < fs[p]) {
      const Point xc = combine(xbar, worst, psi * rho);
      const double fc = eval(xc);
      if (fc <= fr) {
        sim[p] = xc, fs[p] = fc;
      } else {
        shrink = true;
      }
    } else {
      const Point xcc = combine(xbar, worst, -psi);
      const double fcc = eval(xcc);
      if (fcc < fs[p]) {
        sim[p] = xcc, fs[p] = fcc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (std::size_t k = 1; k <= p; ++k) {
        for (std::size_t j = 0; j < p; ++j) sim[k][j] = sim[0][j] + sigma * (sim[k][j] - sim[0][j]);
        clip(sim[k]);
        fs[k] = eval(sim[k]);
      }
    }
    ++res.iterations;
    sort_simplex();
    res.best_history.push_back(fs[0]);
  }
  res.x = sim[0];
  res.value = fs[0];
  return res;
}

/// eta -> gamma of the forward solve against the dataset; +inf where the
/// solver fails or the parameters are not admissible.
inline Objective forward_objective(const Problem& problem, const Dataset& d, DataLossKind kind, SolveOptions opt = {}) {
  const std::vector<double> data = observation_values(d);
  return [&problem, &d, kind, opt, data](std::span<const double> eta) {
    try {
      for (double e : eta)
        if (!std::isfinite(e)) return std::numeric_limits<double>::infinity();
      return gamma(data, predict_observations(problem, d, eta, opt), kind);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
}

}  // namespace pinnverse
