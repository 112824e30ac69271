#pragma once

// Explicit Dormand-Prince 5(4) integrator with step-size control. Steps are
// shortened so that every requested output time is hit exactly, which gives
// full-accuracy output without a continuous extension.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pinnverse/error.hpp"

namespace pinnverse {

using OdeRhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt)>;

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-11;
  std::size_t max_steps = 50'000'000;
};

struct OdeStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
};

namespace detail {

struct DormandPrince {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // b - b_hat (embedded 4th-order weights)
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
};

inline double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                         const OdeOptions& opt) {
  const Eigen::ArrayXd scale = opt.atol + opt.rtol * y0.array().abs().max(y1.array().abs());
  return std::sqrt((err.array() / scale).square().mean());
}

}  // namespace detail

/// Integrates y' = f(t, y) from (t0, y0) and returns the state at each time
/// in `t_eval` (ascending, all >= t0).
inline std::vector<Eigen::VectorXd> integrate_dopri5(const OdeRhs& f, const Eigen::VectorXd& y0, double t0,
                                                     std::span<const double> t_eval, const OdeOptions& opt = {},
                                                     OdeStats* stats = nullptr) {
  using DP = detail::DormandPrince;
  if (!std::is_sorted(t_eval.begin(), t_eval.end()))
    throw InvalidArgument("integrate_dopri5: output times must be ascending");
  if (!t_eval.empty() && t_eval.front() < t0) throw InvalidArgument("integrate_dopri5: output time before t0");

  OdeStats local;
  OdeStats& st = stats ? *stats : local;
  const Eigen::Index n = y0.size();
  Eigen::VectorXd y = y0, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y_new(n), err(n);
  double t = t0;
  f(t, y, k1);
  ++st.rhs_evaluations;

  // Initial step guess (Hairer, Norsett & Wanner, II.4).
  double h;
  {
    const Eigen::ArrayXd scale = opt.atol + opt.rtol * y.array().abs();
    const double d0 = std::sqrt((y.array() / scale).square().mean());
    const double d1 = std::sqrt((k1.array() / scale).square().mean());
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    if (!t_eval.empty()) h0 = std::min(h0, std::max(t_eval.back() - t0, 1e-12));
    tmp = y + h0 * k1;
    f(t + h0, tmp, k2);
    ++st.rhs_evaluations;
    const double d2 = std::sqrt(((k2 - k1).array() / scale).square().mean()) / h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
    h = std::min(100 * h0, h1);
  }

  std::vector<Eigen::VectorXd> out;
  out.reserve(t_eval.size());
  std::size_t next = 0;
  while (next < t_eval.size() && t_eval[next] == t) out.push_back(y), ++next;

  bool last_rejected = false;
  while (next < t_eval.size()) {
    if (st.accepted + st.rejected >= opt.max_steps)
      throw SolverError("integrate_dopri5: step budget exhausted at t = " + std::to_string(t));
    const double target = t_eval[next];
    const bool lands = t + h >= target;
    const double step = lands ? target - t : h;
    if (step <= 16 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), 1.0))
      throw SolverError("integrate_dopri5: step size underflow at t = " + std::to_string(t) +
                        " (stiff or singular system)");

    tmp = y + step * DP::a21 * k1;
    f(t + DP::c2 * step, tmp, k2);
    tmp = y + step * (DP::a31 * k1 + DP::a32 * k2);
    f(t + DP::c3 * step, tmp, k3);
    tmp = y + step * (DP::a41 * k1 + DP::a42 * k2 + DP::a43 * k3);
    f(t + DP::c4 * step, tmp, k4);
    tmp = y + step * (DP::a51 * k1 + DP::a52 * k2 + DP::a53 * k3 + DP::a54 * k4);
    f(t + DP::c5 * step, tmp, k5);
    tmp = y + step * (DP::a61 * k1 + DP::a62 * k2 + DP::a63 * k3 + DP::a64 * k4 + DP::a65 * k5);
    f(t + step, tmp, k6);
    y_new = y + step * (DP::b1 * k1 + DP::b3 * k3 + DP::b4 * k4 + DP::b5 * k5 + DP::b6 * k6);
    f(t + step, y_new, k7);
    st.rhs_evaluations += 6;
    err = step * (DP::e1 * k1 + DP::e3 * k3 + DP::e4 * k4 + DP::e5 * k5 + DP::e6 * k6 + DP::e7 * k7);
    const double e = detail::error_norm(err, y, y_new, opt);

    if (e <= 1.0 && std::isfinite(e)) {
      ++st.accepted;
      t = lands ? target : t + step;
      y.swap(y_new);
      k1.swap(k7);  // first-same-as-last
      if (!y.allFinite()) throw SolverError("integrate_dopri5: solution became non-finite at t = " + std::to_string(t));
      while (next < t_eval.size() && t_eval[next] <= t) out.push_back(y), ++next;
      double factor = e == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(e, -0.2), 0.2, 5.0);
      if (last_rejected) factor = std::min(factor, 1.0);
      // A step clipped to an output time says nothing about the natural size.
      h = lands ? std::max(h, step * factor) : step * factor;
      last_rejected = false;
    } else {
      ++st.rejected;
      h = step * (std::isfinite(e) ? std::max(0.2, 0.9 * std::pow(e, -0.2)) : 0.2);
      last_rejected = true;
    }
  }
  return out;
}

}  // namespace pinnverse
