#pragma once

// Constrained training: the data loss is the objective, the physics losses
// are equality constraints and the parameter bounds enter through the
// infeasibility V = clamp(eta) - eta. The augmented Lagrangian is descended
// in (theta, eta) with Adan while the multipliers ascend, both from the same
// iterate (MDMM).
//
// The same loop also drives the weighted-sum PINN baseline (see baselines.hpp)
// so that both methods share initialisation, schedule and data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pinnverse/adan.hpp"
#include "pinnverse/autodiff.hpp"
#include "pinnverse/error.hpp"
#include "pinnverse/losses.hpp"
#include "pinnverse/network.hpp"

namespace pinnverse {

inline double infeasibility(double eta, double lower, double upper) {
  if (!(lower <= upper)) throw InvalidArgument("infeasibility: lower bound exceeds upper bound");
  return std::clamp(eta, lower, upper) - eta;
}

inline ad::Var infeasibility(ad::Var eta, double lower, double upper) {
  if (!(lower <= upper)) throw InvalidArgument("infeasibility: lower bound exceeds upper bound");
  return ad::clamp(eta, lower, upper) - eta;
}

struct MultiplierState {
  std::vector<double> lambda, c;  // equality constraints
  std::vector<double> chi, d;     // bound constraints

  MultiplierState() = default;
  MultiplierState(std::size_t equalities, std::size_t bounds, double penalty_c = 1.0, double penalty_d = 1.0)
      : lambda(equalities, 0.0), c(equalities, penalty_c), chi(bounds, 0.0), d(bounds, penalty_d) {
    if (!(penalty_c > 0.0) || !(penalty_d > 0.0)) throw InvalidArgument("multipliers: penalty coefficients must be positive");
  }
};

/// L_data + sum(lambda_i L_i + c_i/2 L_i^2) + sum(chi_j V_j + d_j/2 V_j^2)
template <class T>
T augmented_lagrangian(const T& objective, std::span<const T> constraints, std::span<const T> infeasibilities,
                       const MultiplierState& mult) {
  if (constraints.size() != mult.lambda.size() || infeasibilities.size() != mult.chi.size())
    throw InvalidArgument("augmented_lagrangian: multiplier count differs from constraint count");
  T out = objective;
  for (std::size_t i = 0; i < constraints.size(); ++i)
    out = out + constraints[i] * mult.lambda[i] + constraints[i] * constraints[i] * (0.5 * mult.c[i]);
  for (std::size_t j = 0; j < infeasibilities.size(); ++j)
    out = out + infeasibilities[j] * mult.chi[j] + infeasibilities[j] * infeasibilities[j] * (0.5 * mult.d[j]);
  return out;
}

/// Linear decay from `initial` to `floor` until `hold` epochs remain, then
/// constant. Runs no longer than `hold` decay over their whole length.
struct LearningRateSchedule {
  double initial = 1e-2;
  double floor = 1e-4;
  std::size_t hold = 30000;

  double operator()(std::size_t epoch, std::size_t total) const {
    if (total == 0 || epoch >= total) throw InvalidArgument("lr_schedule: epoch outside [0, total)");
    const std::size_t span = total > hold ? total - hold : total;
    if (epoch >= span) return floor;
    const double f = static_cast<double>(epoch) / static_cast<double>(span);
    return initial + (floor - initial) * f;
  }
};

inline double lr_schedule(std::size_t epoch, std::size_t total) { return LearningRateSchedule{}(epoch, total); }

/// L_A, its gradient in the primal variables, and the constraint values
/// (L_i and V_j) at one iterate.
struct LagrangianEval {
  double value = 0.0;
  std::vector<double> gradient;
  std::vector<double> constraints;
  std::vector<double> infeasibilities;
};

using LagrangianFn = std::function<LagrangianEval(std::span<const double> primal, const MultiplierState& mult)>;

enum class StepStatus { Accepted, Rejected };

/// One simultaneous update. Primal and dual changes are both computed from
/// the evaluation at the incoming iterate. A non-finite evaluation leaves
/// everything unchanged.
inline StepStatus mdmm_step(std::vector<double>& primal, AdanState& adan, MultiplierState& mult, double alpha,
                            const LagrangianFn& f, LagrangianEval* seen = nullptr) {
  LagrangianEval e = f(primal, mult);
  const auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  const bool ok = std::isfinite(e.value) && finite(e.gradient) && finite(e.constraints) && finite(e.infeasibilities);
  if (seen) *seen = e;
  if (!ok) return StepStatus::Rejected;
  const std::vector<double> delta = adan.step(e.gradient, alpha, primal);
  for (std::size_t i = 0; i < primal.size(); ++i) primal[i] += delta[i];
  for (std::size_t i = 0; i < mult.lambda.size(); ++i) mult.lambda[i] += alpha * e.constraints[i];
  for (std::size_t j = 0; j < mult.chi.size(); ++j) mult.chi[j] += alpha * e.infeasibilities[j];
  return StepStatus::Accepted;
}

// ---------------------------------------------------------------------------

enum class Method { PinnVerse, Pinn };

inline std::string_view to_string(Method m) { return m == Method::PinnVerse ? "pinnverse" : "pinn"; }

struct TrainConfig {
  std::size_t epochs = 500000;
  LearningRateSchedule schedule;
  AdanOptions adan;
  double penalty_c = 1.0;
  double penalty_d = 1.0;
  double xi = 0.0;  // eta_start = (1 + xi) eta_true
  std::uint64_t init_seed = 0;
  double divergence_threshold = 1e8;
  std::size_t max_rejections = 5;
};

struct EpochRecord {
  std::size_t epoch = 0;
  LossVector<double> loss;
  double alpha = 0.0;
  std::vector<double> eta;
  std::vector<double> lambda;
  std::vector<double> chi;
};

enum class TrainStatus { Completed, Diverged, Aborted };

inline std::string_view to_string(TrainStatus s) {
  switch (s) {
    case TrainStatus::Completed: return "ok";
    case TrainStatus::Diverged: return "diverged";
    case TrainStatus::Aborted: return "aborted";
  }
  return "?";
}

struct TrainResult {
  Method method = Method::PinnVerse;
  TrainStatus status = TrainStatus::Completed;
  std::string message;
  NetworkParams params;  // de_carriers hold eta (constrained) or log eta (PINN)
  std::vector<double> eta_est;
  std::vector<double> infeasibility;  // V_j at eta_est
  LossVector<double> final_loss;      // at the returned iterate
  std::vector<EpochRecord> log;
  MultiplierState multipliers;
  std::size_t epochs_run = 0;
  std::uint64_t init_seed = 0;
};

namespace detail {

inline std::vector<double> carriers_to_eta(Method m, std::span<const double> carriers) {
  std::vector<double> eta(carriers.begin(), carriers.end());
  if (m == Method::Pinn)
    for (double& e : eta) e = std::exp(e);
  return eta;
}

}  // namespace detail

/// Shared training loop for both methods.
inline TrainResult train(Method method, const LossEvaluator& ev, std::span<const double> eta_true,
                         std::span<const double> lower, std::span<const double> upper, const TrainConfig& cfg) {
  const ProblemSpec& s = ev.problem().spec();
  const std::size_t p = eta_true.size();
  if (static_cast<int>(p) != s.param_dim || lower.size() != p || upper.size() != p)
    throw InvalidArgument("train: parameter vector sizes differ from the problem's");
  if (cfg.epochs == 0) throw InvalidArgument("train: epochs must be positive");
  if (!(cfg.xi >= -1.0)) throw InvalidArgument("train: xi must be at least -1");

  TrainResult r;
  r.method = method;
  r.init_seed = cfg.init_seed;
  r.params = init_params(ev.network(), cfg.init_seed);
  for (std::size_t j = 0; j < p; ++j) {
    const double start = (1.0 + cfg.xi) * eta_true[j];
    if (method == Method::Pinn && !(start > 0.0))
      throw InvalidArgument("train: the exponential parameterisation needs a positive starting value");
    r.params.de_carriers.push_back(method == Method::Pinn ? std::log(start) : start);
  }
  const std::size_t n_eq = ev.points().boundary.empty() ? 2 : 3;
  r.multipliers = method == Method::PinnVerse ? MultiplierState(n_eq, p, cfg.penalty_c, cfg.penalty_d) : MultiplierState();

  std::vector<double> primal = r.params.flatten();
  const std::size_t n_net = primal.size() - p;
  AdanState adan(primal.size(), cfg.adan);
  NetworkParams work = r.params;
  NetworkParams grad = r.params.zeros_like();
  ad::Tape tape;
  std::vector<double> adjoint;
  LossVector<double> last_loss;

  const LagrangianFn evaluate = [&](std::span<const double> x, const MultiplierState& mult) {
    work.assign(x);
    tape.clear();
    TapedNetwork net(tape, ev.network(), work);
    std::vector<ad::Var> carriers, eta;
    for (double c : work.de_carriers) carriers.push_back(tape.variable(c));
    for (ad::Var c : carriers) eta.push_back(method == Method::Pinn ? ad::exp(c) : c);
    const LossVector<ad::Var> l = ev.record(net, eta);
    last_loss = values_of(l);

    LagrangianEval e;
    ad::Var objective;
    if (method == Method::PinnVerse) {
      std::vector<ad::Var> cons{l.de, l.ic};
      if (n_eq == 3) cons.push_back(l.bc);
      std::vector<ad::Var> v;
      for (std::size_t j = 0; j < p; ++j) v.push_back(infeasibility(eta[j], lower[j], upper[j]));
      objective = augmented_lagrangian<ad::Var>(l.data, cons, v, mult);
      for (const ad::Var& c : cons) e.constraints.push_back(c.value());
      for (const ad::Var& vj : v) e.infeasibilities.push_back(vj.value());
    } else {
      objective = pinn_loss(l);
    }
    e.value = objective.value();
    e.gradient.assign(x.size(), 0.0);
    if (!std::isfinite(e.value)) return e;
    tape.gradient(objective, adjoint);
    for (auto& w : grad.weights) w.setZero();
    for (auto& b : grad.biases) b.setZero();
    net.accumulate(adjoint, grad);
    const std::vector<double> flat = grad.flatten();
    std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n_net), e.gradient.begin());
    for (std::size_t j = 0; j < p; ++j) e.gradient[n_net + j] = adjoint[static_cast<std::size_t>(carriers[j].index())];
    return e;
  };

  r.log.reserve(cfg.epochs);
  std::size_t rejections = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double alpha = cfg.schedule(epoch, cfg.epochs);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.alpha = alpha;
    rec.lambda = r.multipliers.lambda;
    rec.chi = r.multipliers.chi;
    rec.eta = detail::carriers_to_eta(method, std::span(primal).subspan(n_net));

    LagrangianEval e;
    StepStatus st;
    if (method == Method::PinnVerse) {
      st = mdmm_step(primal, adan, r.multipliers, alpha, evaluate, &e);
    } else {
      e = evaluate(primal, r.multipliers);
      const bool ok = std::isfinite(e.value) &&
                      std::all_of(e.gradient.begin(), e.gradient.end(), [](double g) { return std::isfinite(g); });
      st = ok ? StepStatus::Accepted : StepStatus::Rejected;
      if (ok) {
        const auto delta = adan.step(e.gradient, alpha, primal);
        for (std::size_t i = 0; i < primal.size(); ++i) primal[i] += delta[i];
      }
    }
    rec.loss = last_loss;
    r.log.push_back(std::move(rec));

    const LossVector<double>& l = last_loss;
    const bool loss_finite = std::isfinite(l.data) && std::isfinite(l.de) && std::isfinite(l.ic) && std::isfinite(l.bc);
    if (!loss_finite || !std::isfinite(e.value) || e.value > cfg.divergence_threshold) {
      r.status = TrainStatus::Diverged;
      r.message = "loss diverged at epoch " + std::to_string(epoch) + " (objective " + std::to_string(e.value) + ")";
      if (auto nf = tape.first_non_finite()) r.message += "; " + nf->describe();
      break;
    }
    if (st == StepStatus::Rejected) {
      if (++rejections >= cfg.max_rejections) {
        r.status = TrainStatus::Aborted;
        r.message = "non-finite gradient at epoch " + std::to_string(epoch) + ", step rejected " +
                    std::to_string(rejections) + " times";
        break;
      }
      continue;
    }
    rejections = 0;
    r.epochs_run = epoch + 1;
  }

  r.params.assign(primal);
  r.eta_est = detail::carriers_to_eta(method, r.params.de_carriers);
  for (std::size_t j = 0; j < p; ++j) r.infeasibility.push_back(std::clamp(r.eta_est[j], lower[j], upper[j]) - r.eta_est[j]);
  r.final_loss = ev.evaluate(r.params, r.eta_est);
  return r;
}

/// Constrained (MDMM) training from eta_start = (1 + xi) eta_true.
inline TrainResult train_pinnverse(const LossEvaluator& ev, std::span<const double> eta_true, const TrainConfig& cfg) {
  const ProblemSpec& s = ev.problem().spec();
  return train(Method::PinnVerse, ev, eta_true, s.eta_lower, s.eta_upper, cfg);
}

}  // namespace pinnverse
