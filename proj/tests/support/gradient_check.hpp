#pragma once

// Tape gradients of every loss term against central differences.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "pinnverse/losses.hpp"

namespace pinnverse::testsupport {

inline double term(const LossVector<double>& l, int k) {
  const std::array<double, 4> v{l.data, l.de, l.ic, l.bc};
  return v[static_cast<std::size_t>(k)];
}

inline ad::Var term(const LossVector<ad::Var>& l, int k) {
  const std::array<ad::Var, 4> v{l.data, l.de, l.ic, l.bc};
  return v[static_cast<std::size_t>(k)];
}

inline const char* term_name(int k) {
  static const char* names[] = {"data", "de", "ic", "bc"};
  return names[k];
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct GradientCheck {
  double worst_relative = 0.0;  // over entries whose magnitude exceeds the absolute floor
  double worst_absolute = 0.0;  // over entries below the floor
  std::size_t failures = 0;
  std::size_t checked = 0;
  std::string first_failure;
};

/// Compares d(term k)/d(theta, eta) for all four terms. Entries pass when the
/// relative error is below `rel_tol`, or, when both values are below
/// `abs_floor`, when they differ by less than `abs_floor`.
inline std::array<GradientCheck, 4> check_loss_gradients(const LossEvaluator& ev, const NetworkParams& params,
                                                         const std::vector<double>& eta, double rel_tol = 1e-4,
                                                         double abs_floor = 1e-7) {
  std::array<std::vector<double>, 4> analytic;
  for (int k = 0; k < 4; ++k) {
    ad::Tape tape;
    TapedNetwork net(tape, ev.network(), params);
    std::vector<ad::Var> e;
    for (double v : eta) e.push_back(tape.variable(v));
    const auto l = ev.record(net, e);
    const auto adj = tape.gradient(term(l, k));
    analytic[k] = net.backpropagate(adj).flatten();
    for (const auto& v : e) analytic[k].push_back(adj[static_cast<std::size_t>(v.index())]);
  }

  std::vector<double> flat = params.flatten();
  const std::size_t n_theta = flat.size();
  NetworkParams work = params;
  std::vector<double> eta_work = eta;
  std::array<GradientCheck, 4> out;
  for (std::size_t i = 0; i < n_theta + eta.size(); ++i) {
    double& x = i < n_theta ? flat[i] : eta_work[i - n_theta];
    const double x0 = x;
    // Fourth-order central stencil: truncation and rounding both stay far
    // below the tolerance even for derivatives of order 1e-6.
    const double h = 1e-3 * std::max(1.0, std::abs(x0));
    const auto at = [&](double offset) {
      x = x0 + offset;
      work.assign(flat);
      return ev.evaluate(work, eta_work);
    };
    const auto l2p = at(2 * h), lp = at(h), lm = at(-h), l2m = at(-2 * h);
    x = x0;
    for (int k = 0; k < 4; ++k) {
      const double fd = (term(l2m, k) - 8 * term(lm, k) + 8 * term(lp, k) - term(l2p, k)) / (12 * h);
      const double g = analytic[k][i];
      const double scale = std::max(std::abs(g), std::abs(fd));
      const double diff = std::abs(g - fd);
      GradientCheck& c = out[k];
      ++c.checked;
      bool ok;
      if (scale < abs_floor) {
        c.worst_absolute = std::max(c.worst_absolute, diff);
        ok = diff < abs_floor;
      } else {
        const double rel = diff / scale;
        ok = rel < rel_tol;
        c.worst_relative = std::max(c.worst_relative, rel);
      }
      if (!ok) {
        if (c.failures++ == 0)
          c.first_failure = std::string(i < n_theta ? "theta[" : "eta[") +
                            std::to_string(i < n_theta ? i : i - n_theta) + "]: tape " + fmt(g) + " vs difference " + fmt(fd);
      }
    }
  }
  return out;
}

}  // namespace pinnverse::testsupport
