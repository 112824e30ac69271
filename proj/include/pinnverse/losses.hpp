#pragma once

// The four loss terms, the weighted composite, and an evaluator that records
// all of them on one tape for a given network and parameter vector.

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pinnverse/autodiff.hpp"
#include "pinnverse/dataset.hpp"
#include "pinnverse/error.hpp"
#include "pinnverse/network.hpp"
#include "pinnverse/problems.hpp"
#include "pinnverse/sampling.hpp"

namespace pinnverse {

template <class T>
struct LossVector {
  T data{}, de{}, ic{}, bc{};
};

inline LossVector<double> values_of(const LossVector<ad::Var>& l) {
  return {l.data.value(), l.de.value(), l.ic.value(), l.bc.value()};
}

namespace detail {

// sqrt with a zero subgradient at 0, so an exact fit does not produce inf * 0.
inline double safe_sqrt(double x) { return std::sqrt(x); }
inline ad::Var safe_sqrt(ad::Var x) { return x.value() > 0.0 ? ad::sqrt(x) : x * 0.0; }

template <class T>
T mean_or_zero(const T& sum, std::size_t n) {
  if (n == 0) return sum * 0.0;
  return sum * (1.0 / static_cast<double>(n));
}

}  // namespace detail

/// RMS of (pred - data), or of (pred - data) / data for the relative kind.
template <class T>
T data_loss(std::span<const T> pred, std::span<const double> data, DataLossKind kind) {
  if (pred.size() != data.size()) throw InvalidArgument("data_loss: prediction and data sizes differ");
  if (data.empty()) throw InvalidArgument("data_loss: no data");
  T sum = T(pred[0] * 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    T r = pred[i] - data[i];
    if (kind == DataLossKind::Relative) {
      if (data[i] == 0.0)
        throw InvalidArgument("data_loss: relative loss needs nonzero data (datum " + std::to_string(i) +
                              " is zero); use the absolute kind");
      r = r * (1.0 / data[i]);
    }
    sum = sum + r * r;
  }
  return detail::safe_sqrt(detail::mean_or_zero(sum, data.size()));
}

/// Mean over points of the squared Euclidean norm of the residual.
/// `jet_at(i, c)` returns the jet of component c at point i.
template <class T, class JetAt>
T de_loss(const Problem& problem, std::span<const SpaceTimePoint> points, JetAt&& jet_at, std::span<const T> eta) {
  if (points.empty()) throw InvalidArgument("de_loss: no collocation points");
  const int m = problem.spec().state_dim;
  std::vector<ad::Jet<T>> u(static_cast<std::size_t>(m));
  std::vector<T> r(static_cast<std::size_t>(m));
  T sum = T(jet_at(0, 0).u * 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int c = 0; c < m; ++c) u[c] = jet_at(i, c);
    problem.residual(points[i], u, eta, r);
    for (int c = 0; c < m; ++c) sum = sum + r[c] * r[c];
  }
  return detail::mean_or_zero(sum, points.size());
}

/// Mean over points of |u(x, 0) - h(x)|^2.
template <class T, class ValueAt>
T ic_loss(const Problem& problem, std::span<const SpaceTimePoint> points, ValueAt&& value_at) {
  const int m = problem.spec().state_dim;
  if (points.empty()) return T{};
  T sum = T(value_at(0, 0) * 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::vector<double> h = problem.initial(points[i].x);
    for (int c = 0; c < m; ++c) {
      const T d = value_at(i, c) - h[c];
      sum = sum + d * d;
    }
  }
  return detail::mean_or_zero(sum, points.size());
}

/// Mean over boundary points of |B u|^2: u for Dirichlet, u_x for Neumann.
template <class T, class JetAt>
T bc_loss(const Problem& problem, std::span<const SpaceTimePoint> points, JetAt&& jet_at) {
  const ProblemSpec& s = problem.spec();
  if (points.empty()) return T{};
  T sum = T(jet_at(0, 0).u * 0.0);
  for (std::size_t i = 0; i < points.size(); ++i)
    for (int c = 0; c < s.state_dim; ++c) {
      const auto j = jet_at(i, c);
      const T b = s.boundary == BoundaryKind::NeumannZero ? j.u_x : j.u;
      sum = sum + b * b;
    }
  return detail::mean_or_zero(sum, points.size());
}

struct LossWeights {
  double data = 1.0, de = 1.0, ic = 1.0, bc = 1.0;
};

template <class T>
T pinn_loss(const LossVector<T>& l, const LossWeights& w = {}) {
  if (w.data < 0 || w.de < 0 || w.ic < 0 || w.bc < 0) throw InvalidArgument("pinn_loss: weights must be nonnegative");
  return l.data * w.data + l.de * w.de + l.ic * w.ic + l.bc * w.bc;
}

/// Holds one benchmark's fixed training inputs and records the loss vector.
class LossEvaluator {
 public:
  LossEvaluator(const Problem& problem, NetworkSpec net, CollocationSet points, const Dataset& data, DataLossKind kind)
      : problem_(&problem), net_(std::move(net)), points_(std::move(points)), kind_(kind) {
    net_.validate();
    if (net_.output_dim != problem.spec().state_dim) throw InvalidArgument("LossEvaluator: network output size differs from state size");
    locations_ = data.locations(&location_of_);
    for (const auto& o : data.observations) {
      component_.push_back(o.component);
      values_.push_back(o.value);
    }
  }

  const Problem& problem() const { return *problem_; }
  const NetworkSpec& network() const { return net_; }
  const CollocationSet& points() const { return points_; }
  DataLossKind data_kind() const { return kind_; }

  LossVector<ad::Var> record(TapedNetwork& net, std::span<const ad::Var> eta) const {
    const ProblemSpec& s = problem_->spec();
    LossVector<ad::Var> l;

    const JetBlock obs = net.evaluate(locations_, DerivativeOrder::Value);
    std::vector<ad::Var> pred;
    pred.reserve(values_.size());
    for (std::size_t k = 0; k < values_.size(); ++k)
      pred.push_back(obs.value(static_cast<Eigen::Index>(location_of_[k]), component_[k]));
    l.data = data_loss<ad::Var>(pred, values_, kind_);

    const JetBlock in = net.evaluate(points_.interior, derivative_order(s.residual_order()));
    l.de = de_loss<ad::Var>(*problem_, points_.interior, [&](std::size_t i, int c) { return in.at(static_cast<Eigen::Index>(i), c); }, eta);

    const ad::Var zero = eta.empty() ? l.de * 0.0 : eta[0] * 0.0;
    l.ic = zero;
    if (!points_.initial.empty()) {
      const JetBlock ic = net.evaluate(points_.initial, DerivativeOrder::Value);
      l.ic = ic_loss<ad::Var>(*problem_, points_.initial, [&](std::size_t i, int c) { return ic.value(static_cast<Eigen::Index>(i), c); });
    }
    l.bc = zero;
    if (!points_.boundary.empty()) {
      const auto order = s.boundary == BoundaryKind::NeumannZero ? DerivativeOrder::First : DerivativeOrder::Value;
      const JetBlock bc = net.evaluate(points_.boundary, order);
      l.bc = bc_loss<ad::Var>(*problem_, points_.boundary, [&](std::size_t i, int c) { return bc.at(static_cast<Eigen::Index>(i), c); });
    }
    return l;
  }

  /// Loss values only.
  LossVector<double> evaluate(const NetworkParams& params, std::span<const double> eta) const {
    ad::Tape tape;
    TapedNetwork net(tape, net_, params);
    std::vector<ad::Var> e;
    for (double v : eta) e.push_back(tape.variable(v));
    return values_of(record(net, e));
  }

 private:
  const Problem* problem_;
  NetworkSpec net_;
  CollocationSet points_;
  DataLossKind kind_;
  std::vector<SpaceTimePoint> locations_;
  std::vector<std::size_t> location_of_;
  std::vector<int> component_;
  std::vector<double> values_;
};

}  // namespace pinnverse
