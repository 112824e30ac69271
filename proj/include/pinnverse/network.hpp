#pragma once

// Fully connected tanh network u(x, t) with exact input derivatives.
//
// Input derivatives are propagated in forward mode through the whole batch
// (one matrix per derivative slot), and `JetEvaluator::accumulate_gradient`
// runs the matching reverse pass for the weights. `TapedNetwork` exposes the
// batch outputs as leaves on an ad::Tape so that arbitrary loss algebra can be
// recorded on top and the adjoints routed back into the weights.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "pinnverse/autodiff.hpp"
#include "pinnverse/error.hpp"

namespace pinnverse {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return hi - lo; }
  double center() const { return 0.5 * (lo + hi); }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

struct SpaceTimePoint {
  double x = 0.0;
  double t = 0.0;
};

/// Fixed sinusoidal embedding of the spatial coordinate.
struct FourierConfig {
  std::vector<double> frequencies;  // angular frequencies

  int num_frequencies() const { return static_cast<int>(frequencies.size()); }

  /// Integer harmonics k*pi/half_width, k = 1..count.
  static FourierConfig harmonics(int count, double half_width) {
    FourierConfig cfg;
    for (int k = 1; k <= count; ++k) cfg.frequencies.push_back(k * std::numbers::pi / half_width);
    return cfg;
  }
};

/// [sin(w1 x), cos(w1 x), ..., sin(wK x), cos(wK x)]
inline std::vector<double> fourier_embed(double x, const FourierConfig& cfg) {
  if (cfg.frequencies.empty()) throw InvalidArgument("fourier_embed: at least one frequency required");
  std::vector<double> out;
  out.reserve(2 * cfg.frequencies.size());
  for (double w : cfg.frequencies) {
    out.push_back(std::sin(w * x));
    out.push_back(std::cos(w * x));
  }
  return out;
}

struct NetworkSpec {
  int input_dim = 1;  // 1: u(t); 2: u(x, t)
  int hidden_layers = 2;
  int hidden_width = 20;
  int output_dim = 1;
  std::optional<FourierConfig> fourier;
  // Each input coordinate is mapped affinely onto [-1, 1] before the first layer.
  Interval time{0.0, 1.0};
  Interval space{-1.0, 1.0};

  int feature_dim() const {
    if (input_dim == 1) return 1;
    return (fourier ? 2 * fourier->num_frequencies() : 1) + 1;
  }

  /// Linear layer shapes as (fan_out, fan_in).
  std::vector<std::array<int, 2>> layer_shapes() const {
    std::vector<std::array<int, 2>> shapes;
    int fan_in = feature_dim();
    for (int l = 0; l < hidden_layers; ++l) {
      shapes.push_back({hidden_width, fan_in});
      fan_in = hidden_width;
    }
    shapes.push_back({output_dim, fan_in});
    return shapes;
  }

  void validate() const {
    if (input_dim != 1 && input_dim != 2) throw InvalidArgument("network: input_dim must be 1 or 2");
    if (hidden_layers < 1 || hidden_width < 1 || output_dim < 1)
      throw InvalidArgument("network: layer counts must be positive");
    if (fourier && fourier->frequencies.empty())
      throw InvalidArgument("network: fourier embedding needs at least one frequency");
    if (fourier && input_dim != 2) throw InvalidArgument("network: fourier embedding needs a spatial input");
    if (!(time.width() > 0.0) || (input_dim == 2 && !(space.width() > 0.0)))
      throw InvalidArgument("network: normalisation ranges must have positive width");
  }
};

/// Trainable scalars: weights and biases per layer, plus DE-parameter
/// carriers (raw eta for the constrained trainer, log-eta for the PINN).
struct NetworkParams {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  std::vector<double> de_carriers;

  std::size_t size() const {
    std::size_t n = de_carriers.size();
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  /// Layer-by-layer (weights column-major, then bias), carriers last.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(size());
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.insert(out.end(), weights[l].data(), weights[l].data() + weights[l].size());
      out.insert(out.end(), biases[l].data(), biases[l].data() + biases[l].size());
    }
    out.insert(out.end(), de_carriers.begin(), de_carriers.end());
    return out;
  }

  void assign(std::span<const double> flat) {
    if (flat.size() != size()) throw InvalidArgument("NetworkParams::assign: size mismatch");
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (Eigen::Index i = 0; i < weights[l].size(); ++i) weights[l].data()[i] = flat[k++];
      for (Eigen::Index i = 0; i < biases[l].size(); ++i) biases[l][i] = flat[k++];
    }
    for (double& c : de_carriers) c = flat[k++];
  }

  /// Same shapes, all entries zero.
  NetworkParams zeros_like() const {
    NetworkParams z;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      z.weights.push_back(Eigen::MatrixXd::Zero(weights[l].rows(), weights[l].cols()));
      z.biases.push_back(Eigen::VectorXd::Zero(biases[l].size()));
    }
    z.de_carriers.assign(de_carriers.size(), 0.0);
    return z;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l)
      if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    for (double c : de_carriers)
      if (!std::isfinite(c)) return false;
    return true;
  }

  void check_shapes(const NetworkSpec& spec) const {
    const auto shapes = spec.layer_shapes();
    if (weights.size() != shapes.size() || biases.size() != shapes.size())
      throw InvalidArgument("network: parameter layer count does not match spec");
    for (std::size_t l = 0; l < shapes.size(); ++l) {
      if (weights[l].rows() != shapes[l][0] || weights[l].cols() != shapes[l][1] || biases[l].size() != shapes[l][0])
        throw InvalidArgument("network: parameter shape does not match spec at layer " + std::to_string(l));
    }
  }
};

/// Glorot-uniform weights, zero biases.
inline NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  NetworkParams p;
  for (const auto& [fan_out, fan_in] : spec.layer_shapes()) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return p;
}

enum class DerivativeOrder : int { Value = 0, First = 1, Second = 2 };

inline DerivativeOrder derivative_order(int order) {
  if (order < 0 || order > 2) throw InvalidArgument("unsupported derivative order " + std::to_string(order));
  return static_cast<DerivativeOrder>(order);
}

/// One matrix (output_dim x points) per derivative slot. Slots that were not
/// requested are empty.
struct JetBatch {
  Eigen::MatrixXd u, u_t, u_x, u_xx;
};

class JetEvaluator {
 public:
  JetEvaluator(const NetworkSpec& spec, const NetworkParams& params, std::span<const SpaceTimePoint> points,
               DerivativeOrder order)
      : params_(&params), n_(static_cast<Eigen::Index>(points.size())) {
    params.check_shapes(spec);
    has_t_ = order != DerivativeOrder::Value;
    has_x_ = has_t_ && spec.input_dim == 2;
    has_xx_ = order == DerivativeOrder::Second && spec.input_dim == 2;

    const std::size_t n_layers = params.weights.size();
    inputs_.resize(n_layers);
    pre_.resize(n_layers - 1);
    slope_.resize(n_layers - 1);
    build_features(spec, points, inputs_[0]);

    for (std::size_t l = 0; l < n_layers; ++l) {
      Slots z;
      linear(l, inputs_[l], z);
      if (l + 1 == n_layers) {
        out_.u = std::move(z.v);
        out_.u_t = std::move(z.t);
        out_.u_x = std::move(z.x);
        out_.u_xx = std::move(z.xx);
        break;
      }
      Slots& a = inputs_[l + 1];
      a.v = z.v.array().tanh().matrix();
      Eigen::ArrayXXd s = 1.0 - a.v.array().square();
      if (has_t_) a.t = (s * z.t.array()).matrix();
      if (has_x_) a.x = (s * z.x.array()).matrix();
      if (has_xx_) a.xx = (s * z.xx.array() - 2.0 * a.v.array() * s * z.x.array().square()).matrix();
      slope_[l] = std::move(s);
      pre_[l] = std::move(z);
    }
  }

  const JetBatch& outputs() const { return out_; }
  Eigen::Index points() const { return n_; }
  bool has_t() const { return has_t_; }
  bool has_x() const { return has_x_; }
  bool has_xx() const { return has_xx_; }

  /// grad += d(sum <adjoint, outputs>)/d(weights, biases). Slots of `adjoint`
  /// that were not evaluated are ignored.
  void accumulate_gradient(const JetBatch& adjoint, NetworkParams& grad) const {
    const std::size_t n_layers = params_->weights.size();
    Slots g{adjoint.u, has_t_ ? adjoint.u_t : Eigen::MatrixXd(), has_x_ ? adjoint.u_x : Eigen::MatrixXd(),
            has_xx_ ? adjoint.u_xx : Eigen::MatrixXd()};
    for (std::size_t l = n_layers; l-- > 0;) {
      const Slots& in = inputs_[l];
      Eigen::MatrixXd& gw = grad.weights[l];
      gw.noalias() += g.v * in.v.transpose();
      if (has_t_) gw.noalias() += g.t * in.t.transpose();
      if (has_x_) gw.noalias() += g.x * in.x.transpose();
      if (has_xx_) gw.noalias() += g.xx * in.xx.transpose();
      grad.biases[l] += g.v.rowwise().sum();
      if (l == 0) break;

      const Eigen::MatrixXd& w = params_->weights[l];
      Slots ga;
      ga.v.noalias() = w.transpose() * g.v;
      if (has_t_) ga.t.noalias() = w.transpose() * g.t;
      if (has_x_) ga.x.noalias() = w.transpose() * g.x;
      if (has_xx_) ga.xx.noalias() = w.transpose() * g.xx;

      // Back through a = tanh(z) and its jets; slope s = 1 - a^2.
      const Slots& z = pre_[l - 1];
      const auto a = in.v.array();
      const Eigen::ArrayXXd& s = slope_[l - 1];
      const Eigen::ArrayXXd ds = -2.0 * a * s;
      Eigen::ArrayXXd gz = ga.v.array() * s;
      if (has_t_) gz += ds * ga.t.array() * z.t.array();
      if (has_x_) gz += ds * ga.x.array() * z.x.array();
      if (has_xx_) {
        const Eigen::ArrayXXd dds = -2.0 * s * (s - 2.0 * a.square());
        gz += ds * ga.xx.array() * z.xx.array() + dds * ga.xx.array() * z.x.array().square();
      }
      Slots next;
      next.v = gz.matrix();
      if (has_t_) next.t = (ga.t.array() * s).matrix();
      if (has_x_) {
        Eigen::ArrayXXd gzx = ga.x.array() * s;
        if (has_xx_) gzx += 2.0 * ga.xx.array() * ds * z.x.array();
        next.x = gzx.matrix();
      }
      if (has_xx_) next.xx = (ga.xx.array() * s).matrix();
      g = std::move(next);
    }
  }

 private:
  struct Slots {
    Eigen::MatrixXd v, t, x, xx;
  };

  void linear(std::size_t l, const Slots& in, Slots& z) const {
    const Eigen::MatrixXd& w = params_->weights[l];
    z.v.noalias() = w * in.v;
    z.v.colwise() += params_->biases[l];
    if (has_t_) z.t.noalias() = w * in.t;
    if (has_x_) z.x.noalias() = w * in.x;
    if (has_xx_) z.xx.noalias() = w * in.xx;
  }

  void build_features(const NetworkSpec& spec, std::span<const SpaceTimePoint> points, Slots& f) const {
    const int d = spec.feature_dim();
    f.v.resize(d, n_);
    if (has_t_) f.t = Eigen::MatrixXd::Zero(d, n_);
    if (has_x_) f.x = Eigen::MatrixXd::Zero(d, n_);
    if (has_xx_) f.xx = Eigen::MatrixXd::Zero(d, n_);
    const double t_scale = 2.0 / spec.time.width();
    const double x_scale = 2.0 / spec.space.width();
    for (Eigen::Index i = 0; i < n_; ++i) {
      const SpaceTimePoint& p = points[static_cast<std::size_t>(i)];
      const double t_norm = (p.t - spec.time.lo) * t_scale - 1.0;
      f.v(d - 1, i) = t_norm;
      if (has_t_) f.t(d - 1, i) = t_scale;
      if (spec.input_dim == 1) continue;
      if (spec.fourier) {
        const double xc = p.x - spec.space.center();
        const auto& w = spec.fourier->frequencies;
        for (std::size_t k = 0; k < w.size(); ++k) {
          const double s = std::sin(w[k] * xc), c = std::cos(w[k] * xc);
          const auto r = static_cast<Eigen::Index>(2 * k);
          f.v(r, i) = s;
          f.v(r + 1, i) = c;
          if (has_x_) {
            f.x(r, i) = w[k] * c;
            f.x(r + 1, i) = -w[k] * s;
          }
          if (has_xx_) {
            f.xx(r, i) = -w[k] * w[k] * s;
            f.xx(r + 1, i) = -w[k] * w[k] * c;
          }
        }
      } else {
        f.v(0, i) = (p.x - spec.space.lo) * x_scale - 1.0;
        if (has_x_) f.x(0, i) = x_scale;
      }
    }
  }

  const NetworkParams* params_;
  Eigen::Index n_;
  bool has_t_ = false, has_x_ = false, has_xx_ = false;
  std::vector<Slots> inputs_;  // inputs_[l] feeds linear layer l
  std::vector<Slots> pre_;     // pre-activation jets of hidden layer l
  std::vector<Eigen::ArrayXXd> slope_;
  JetBatch out_;
};

/// Network output at many points, (output_dim x points).
inline Eigen::MatrixXd predict(const NetworkSpec& spec, const NetworkParams& params,
                               std::span<const SpaceTimePoint> points) {
  return JetEvaluator(spec, params, points, DerivativeOrder::Value).outputs().u;
}

inline std::vector<double> forward(const NetworkSpec& spec, const NetworkParams& params, SpaceTimePoint input) {
  const Eigen::MatrixXd u = predict(spec, params, std::span(&input, 1));
  return {u.data(), u.data() + u.size()};
}

/// Jets at a single point without a tape.
inline std::vector<ad::Jet<double>> eval_jet(const NetworkSpec& spec, const NetworkParams& params,
                                             SpaceTimePoint input, int order) {
  const JetEvaluator ev(spec, params, std::span(&input, 1), derivative_order(order));
  const JetBatch& o = ev.outputs();
  std::vector<ad::Jet<double>> jets(static_cast<std::size_t>(spec.output_dim));
  for (int c = 0; c < spec.output_dim; ++c) {
    auto& j = jets[static_cast<std::size_t>(c)];
    j.u = o.u(c, 0);
    if (ev.has_t()) j.u_t = o.u_t(c, 0);
    if (ev.has_x()) j.u_x = o.u_x(c, 0);
    if (ev.has_xx()) j.u_xx = o.u_xx(c, 0);
  }
  return jets;
}

/// Batch outputs registered on a tape. Each evaluated slot occupies one
/// contiguous column-major (components x points) run of leaves.
class JetBlock {
 public:
  JetBlock() = default;
  JetBlock(ad::Tape* tape, std::array<ad::Index, 4> offsets, ad::Index zero, int m, Eigen::Index n)
      : tape_(tape), offsets_(offsets), zero_(zero), m_(m), n_(n) {}

  ad::Jet<ad::Var> at(Eigen::Index point, int component) const {
    return {slot(0, point, component), slot(1, point, component), slot(2, point, component),
            slot(3, point, component)};
  }
  ad::Var value(Eigen::Index point, int component) const { return slot(0, point, component); }
  Eigen::Index size() const { return n_; }
  int components() const { return m_; }

 private:
  ad::Var slot(std::size_t s, Eigen::Index point, int component) const {
    if (offsets_[s] == ad::kNoOperand) return ad::Var(tape_, zero_);
    return ad::Var(tape_, offsets_[s] + static_cast<ad::Index>(point * m_ + component));
  }

  ad::Tape* tape_ = nullptr;
  std::array<ad::Index, 4> offsets_{ad::kNoOperand, ad::kNoOperand, ad::kNoOperand, ad::kNoOperand};
  ad::Index zero_ = 0;
  int m_ = 0;
  Eigen::Index n_ = 0;
};

/// Connects batched network evaluations to a tape and maps tape adjoints back
/// onto the weights.
class TapedNetwork {
 public:
  TapedNetwork(ad::Tape& tape, const NetworkSpec& spec, const NetworkParams& params)
      : tape_(&tape), spec_(&spec), params_(&params) {
    zero_ = tape.variable(0.0).index();
  }

  JetBlock evaluate(std::span<const SpaceTimePoint> points, DerivativeOrder order) {
    Block b{JetEvaluator(*spec_, *params_, points, order), {}};
    const JetBatch& o = b.eval.outputs();
    const std::array<bool, 4> active{true, b.eval.has_t(), b.eval.has_x(), b.eval.has_xx()};
    const std::array<const Eigen::MatrixXd*, 4> mats{&o.u, &o.u_t, &o.u_x, &o.u_xx};
    for (std::size_t s = 0; s < 4; ++s) {
      b.offsets[s] = ad::kNoOperand;
      if (!active[s]) continue;
      b.offsets[s] = tape_->leaves(std::span(mats[s]->data(), static_cast<std::size_t>(mats[s]->size())));
    }
    JetBlock handle(tape_, b.offsets, zero_, spec_->output_dim, b.eval.points());
    blocks_.push_back(std::move(b));
    return handle;
  }

  std::vector<ad::Jet<ad::Var>> eval_jet(SpaceTimePoint input, int order) {
    const JetBlock block = evaluate(std::span(&input, 1), derivative_order(order));
    std::vector<ad::Jet<ad::Var>> jets;
    for (int c = 0; c < spec_->output_dim; ++c) jets.push_back(block.at(0, c));
    return jets;
  }

  /// Weight/bias gradient given the full adjoint vector of the tape. Carrier
  /// entries of the result are zero.
  NetworkParams backpropagate(std::span<const double> adjoint) const {
    NetworkParams grad = params_->zeros_like();
    accumulate(adjoint, grad);
    return grad;
  }

  void accumulate(std::span<const double> adjoint, NetworkParams& grad) const {
    const auto m = static_cast<Eigen::Index>(spec_->output_dim);
    for (const Block& b : blocks_) {
      const Eigen::Index n = b.eval.points();
      JetBatch g;
      const std::array<Eigen::MatrixXd*, 4> mats{&g.u, &g.u_t, &g.u_x, &g.u_xx};
      for (std::size_t s = 0; s < 4; ++s) {
        if (b.offsets[s] == ad::kNoOperand) continue;
        *mats[s] = Eigen::Map<const Eigen::MatrixXd>(adjoint.data() + b.offsets[s], m, n);
      }
      b.eval.accumulate_gradient(g, grad);
    }
  }

 private:
  struct Block {
    JetEvaluator eval;
    std::array<ad::Index, 4> offsets;
  };

  ad::Tape* tape_;
  const NetworkSpec* spec_;
  const NetworkParams* params_;
  ad::Index zero_;
  std::vector<Block> blocks_;
};

}  // namespace pinnverse
