#pragma once

// Evaluation quantities: parameter error beta, data misfit gamma of a forward
// solve, maximum deviation mu on a probe grid, and a power-law fit of loss
// curves.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pinnverse/dataset.hpp"
#include "pinnverse/error.hpp"
#include "pinnverse/losses.hpp"
#include "pinnverse/network.hpp"
#include "pinnverse/problems.hpp"

namespace pinnverse {

/// Relative RMS error of the estimated parameters.
inline double beta(std::span<const double> eta_true, std::span<const double> eta_est) {
  if (eta_true.size() != eta_est.size() || eta_true.empty()) throw InvalidArgument("beta: parameter vectors differ in size");
  double sum = 0.0;
  for (std::size_t j = 0; j < eta_true.size(); ++j) {
    if (eta_true[j] == 0.0) throw InvalidArgument("beta: true parameter " + std::to_string(j) + " is zero");
    const double r = (eta_true[j] - eta_est[j]) / eta_true[j];
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(eta_true.size()));
}

/// RMS misfit between predictions and the (noisy) data; same definition as the data loss.
inline double gamma(std::span<const double> data, std::span<const double> prediction, DataLossKind kind) {
  return data_loss<double>(prediction, data, kind);
}

inline std::vector<double> observation_values(const Dataset& d) {
  std::vector<double> v;
  for (const auto& o : d.observations) v.push_back(o.value);
  return v;
}

/// Forward solution at `eta` evaluated at every observation of `d`.
inline std::vector<double> predict_observations(const Problem& problem, const Dataset& d, std::span<const double> eta,
                                                const SolveOptions& opt = {}) {
  const ReferenceSolution sol = problem.solve(eta, d.times(), opt);
  std::vector<double> out;
  for (const auto& o : d.observations) out.push_back(sol.at(sol.time_index(o.t), o.component, o.x));
  return out;
}

struct GammaPair {
  double abs = 0.0;
  double rel = 0.0;
};

/// gamma_abs and gamma_rel of the forward solve at `eta`. gamma_rel is NaN
/// when some datum is zero.
inline GammaPair forward_gamma(const Problem& problem, const Dataset& d, std::span<const double> eta,
                               const SolveOptions& opt = {}) {
  const auto pred = predict_observations(problem, d, eta, opt);
  const auto data = observation_values(d);
  GammaPair g;
  g.abs = gamma(data, pred, DataLossKind::Absolute);
  const bool has_zero = std::any_of(data.begin(), data.end(), [](double y) { return y == 0.0; });
  g.rel = has_zero ? std::numeric_limits<double>::quiet_NaN() : gamma(data, pred, DataLossKind::Relative);
  return g;
}

// ---------------------------------------------------------------------------

/// ODE: n times on [0, T]. PDE: every measurement time x n points across the domain.
inline std::vector<SpaceTimePoint> probe_points(const Problem& problem, std::size_t n = 1001) {
  if (n < 2) throw InvalidArgument("probe_points: need at least two points");
  const ProblemSpec& s = problem.spec();
  std::vector<SpaceTimePoint> pts;
  const auto lin = [n](double lo, double hi, std::size_t i) {
    return i + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  if (!s.is_pde()) {
    for (std::size_t i = 0; i < n; ++i) pts.push_back({0.0, lin(0.0, s.horizon, i)});
    return pts;
  }
  for (double t : s.observation_times)
    for (std::size_t i = 0; i < n; ++i) pts.push_back({lin(s.space.lo, s.space.hi, i), t});
  return pts;
}

/// Forward solution at `eta` on probe points (components x points). PDE
/// values between mesh nodes are interpolated linearly.
inline Eigen::MatrixXd solve_on_points(const Problem& problem, std::span<const double> eta,
                                       std::span<const SpaceTimePoint> pts, const SolveOptions& opt = {}) {
  std::vector<double> times;
  for (const auto& p : pts) times.push_back(p.t);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const ReferenceSolution sol = problem.solve(eta, times, opt);
  const int m = problem.spec().state_dim;
  Eigen::MatrixXd out(m, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::size_t k = sol.time_index(pts[i].t);
    for (int c = 0; c < m; ++c) out(c, static_cast<Eigen::Index>(i)) = sol.at(k, c, pts[i].x);
  }
  return out;
}

/// max |prediction - reference| over all entries.
inline double mu(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& reference) {
  if (prediction.rows() != reference.rows() || prediction.cols() != reference.cols())
    throw InvalidArgument("mu: prediction and reference shapes differ");
  if (prediction.size() == 0) return 0.0;
  return (prediction - reference).cwiseAbs().maxCoeff();
}

/// mu of a trained network against the forward solution at eta_true.
inline double network_mu(const Problem& problem, const NetworkSpec& spec, const NetworkParams& params,
                         std::size_t probe = 1001, const SolveOptions& opt = {}) {
  const auto pts = probe_points(problem, probe);
  return mu(predict(spec, params, pts), solve_on_points(problem, problem.spec().eta_true, pts, opt));
}

// ---------------------------------------------------------------------------

struct PowerLawFit {
  double a = 0.0;         // decay exponent: L ~ epoch^(-a)
  double std_error = 0.0;
  std::size_t used = 0;
  std::size_t dropped = 0;  // non-positive or non-finite entries skipped
};

/// Least-squares fit of log L against log epoch over epochs > burn_in, where
/// losses[i] belongs to epoch i + 1.
inline PowerLawFit fit_power_law(std::span<const double> losses, std::size_t burn_in, std::ostream* warn = &std::clog) {
  if (losses.size() <= burn_in) throw InvalidArgument("fit_power_law: log is not longer than the burn-in");
  PowerLawFit f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<std::pair<double, double>> xy;
  for (std::size_t i = burn_in; i < losses.size(); ++i) {
    const double l = losses[i];
    if (!(l > 0.0) || !std::isfinite(l)) {
      ++f.dropped;
      continue;
    }
    const double x = std::log(static_cast<double>(i + 1)), y = std::log(l);
    xy.emplace_back(x, y);
    sx += x, sy += y;
  }
  if (f.dropped > 0 && warn)
    *warn << "warning: fit_power_law dropped " << f.dropped << " non-positive loss values\n";
  f.used = xy.size();
  if (f.used < 3) throw InvalidArgument("fit_power_law: fewer than three usable points");
  const double n = static_cast<double>(f.used);
  const double mx = sx / n, my = sy / n;
  for (const auto& [x, y] : xy) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0) throw InvalidArgument("fit_power_law: degenerate epoch range");
  const double slope = sxy / sxx;
  double rss = 0.0;
  for (const auto& [x, y] : xy) {
    const double r = y - (my + slope * (x - mx));
    rss += r * r;
  }
  f.a = -slope;
  f.std_error = std::sqrt(rss / (n - 2.0) / sxx);
  return f;
}

}  // namespace pinnverse
