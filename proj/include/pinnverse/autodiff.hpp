#pragma once

// Scalar reverse-mode tape plus the forward-mode jet record used to carry
// input derivatives (u, u_t, u_x, u_xx) through residual operators.
//
// A Tape is an append-only Wengert list. Every node stores its primal value
// together with the local partials towards at most two operands, so the
// reverse sweep is a single backwards pass over a flat array. Tapes are
// single-threaded; independent tapes may live on different threads.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pinnverse/error.hpp"

namespace pinnverse::ad {

enum class Op : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  AddConst,
  MulConst,
  ConstSub,
  ConstDiv,
  Square,
  PowConst,
  Sqrt,
  Exp,
  Log,
  Tanh,
  Sin,
  Cos,
  Clamp,
};

constexpr std::string_view op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::AddConst: return "add_const";
    case Op::MulConst: return "mul_const";
    case Op::ConstSub: return "const_sub";
    case Op::ConstDiv: return "const_div";
    case Op::Square: return "square";
    case Op::PowConst: return "pow";
    case Op::Sqrt: return "sqrt";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Tanh: return "tanh";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Clamp: return "clamp";
  }
  return "unknown";
}

using Index = std::int32_t;
inline constexpr Index kNoOperand = -1;

struct Node {
  Op op = Op::Leaf;
  Index lhs = kNoOperand;
  Index rhs = kNoOperand;
  double c0 = 0.0;  // op constant (exponent, addend, lower clamp bound...)
  double c1 = 0.0;  // second constant (upper clamp bound)
  double value = 0.0;
  double d_lhs = 0.0;
  double d_rhs = 0.0;
};

/// Location of the first non-finite primal recorded on a tape.
struct NonFinite {
  Index node;
  Op op;

  std::string describe() const {
    return "non-finite value produced by '" + std::string(op_name(op)) + "' at tape node " +
           std::to_string(node);
  }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape is.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, Index index) : tape_(tape), index_(index) {}

  double value() const;
  Index index() const { return index_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  Index index_ = kNoOperand;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Independent input (trainable scalar or externally computed quantity).
  Var variable(double value) { return push({Op::Leaf, kNoOperand, kNoOperand, 0, 0, value, 0, 0}); }

  /// Reserves `count` consecutive leaves and returns the index of the first.
  Index leaves(std::span<const double> values) {
    const auto first = static_cast<Index>(nodes_.size());
    for (double v : values) variable(v);
    return first;
  }

  Var unary(Op op, Var a, double value, double d_a, double c0 = 0.0, double c1 = 0.0) {
    return push({op, a.index(), kNoOperand, c0, c1, value, d_a, 0.0});
  }

  Var binary(Op op, Var a, Var b, double value, double d_a, double d_b) {
    return push({op, a.index(), b.index(), 0.0, 0.0, value, d_a, d_b});
  }

  double value(Index i) const { return nodes_[static_cast<std::size_t>(i)].value; }
  const Node& node(Index i) const { return nodes_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return nodes_.size(); }

  /// Drops all nodes but keeps the allocation for the next step.
  void clear() {
    nodes_.clear();
    first_non_finite_.reset();
  }

  void reserve(std::size_t n) { nodes_.reserve(n); }

  std::optional<NonFinite> first_non_finite() const { return first_non_finite_; }

  /// Reverse sweep seeded with d(output)/d(output) = 1. Returns one adjoint per node.
  std::vector<double> gradient(Var output) const {
    std::vector<double> adjoint;
    gradient(output, adjoint);
    return adjoint;
  }

  void gradient(Var output, std::vector<double>& adjoint) const {
    if (output.tape() != this) throw InvalidArgument("gradient: output does not belong to this tape");
    const double out = value(output.index());
    if (!std::isfinite(out)) {
      std::string msg = "gradient: loss is non-finite";
      if (first_non_finite_) msg += " (" + first_non_finite_->describe() + ")";
      throw NumericalError(msg);
    }
    adjoint.assign(nodes_.size(), 0.0);
    adjoint[static_cast<std::size_t>(output.index())] = 1.0;
    for (auto i = static_cast<std::ptrdiff_t>(output.index()); i >= 0; --i) {
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      const double a = adjoint[static_cast<std::size_t>(i)];
      if (a == 0.0 || n.op == Op::Leaf) continue;
      adjoint[static_cast<std::size_t>(n.lhs)] += a * n.d_lhs;
      if (n.rhs != kNoOperand) adjoint[static_cast<std::size_t>(n.rhs)] += a * n.d_rhs;
    }
  }

  /// Recomputes every primal from the leaves and the recorded op codes.
  std::vector<double> replay() const {
    std::vector<double> v(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      const double a = n.lhs == kNoOperand ? 0.0 : v[static_cast<std::size_t>(n.lhs)];
      const double b = n.rhs == kNoOperand ? 0.0 : v[static_cast<std::size_t>(n.rhs)];
      v[i] = evaluate(n, a, b);
    }
    return v;
  }

  static double evaluate(const Node& n, double a, double b) {
    switch (n.op) {
      case Op::Leaf: return n.value;
      case Op::Add: return a + b;
      case Op::Sub: return a - b;
      case Op::Mul: return a * b;
      case Op::Div: return a / b;
      case Op::Neg: return -a;
      case Op::AddConst: return a + n.c0;
      case Op::MulConst: return a * n.c0;
      case Op::ConstSub: return n.c0 - a;
      case Op::ConstDiv: return n.c0 / a;
      case Op::Square: return a * a;
      case Op::PowConst: return std::pow(a, n.c0);
      case Op::Sqrt: return std::sqrt(a);
      case Op::Exp: return std::exp(a);
      case Op::Log: return std::log(a);
      case Op::Tanh: return std::tanh(a);
      case Op::Sin: return std::sin(a);
      case Op::Cos: return std::cos(a);
      case Op::Clamp: return a < n.c0 ? n.c0 : (a > n.c1 ? n.c1 : a);
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

 private:
  Var push(const Node& n) {
    const auto index = static_cast<Index>(nodes_.size());
    nodes_.push_back(n);
    if (!first_non_finite_ && !std::isfinite(n.value)) first_non_finite_ = NonFinite{index, n.op};
    return Var(this, index);
  }

  std::vector<Node> nodes_;
  std::optional<NonFinite> first_non_finite_;
};

inline double Var::value() const { return tape_->value(index_); }

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

// Arithmetic. Mixed Var/double overloads fold the constant into the node.

inline Var operator+(Var a, Var b) { return a.tape()->binary(Op::Add, a, b, a.value() + b.value(), 1.0, 1.0); }
inline Var operator-(Var a, Var b) { return a.tape()->binary(Op::Sub, a, b, a.value() - b.value(), 1.0, -1.0); }
inline Var operator*(Var a, Var b) {
  const double av = a.value(), bv = b.value();
  return a.tape()->binary(Op::Mul, a, b, av * bv, bv, av);
}
inline Var operator/(Var a, Var b) {
  const double av = a.value(), bv = b.value();
  const double q = av / bv;
  return a.tape()->binary(Op::Div, a, b, q, 1.0 / bv, -q / bv);
}
inline Var operator-(Var a) { return a.tape()->unary(Op::Neg, a, -a.value(), -1.0); }

inline Var operator+(Var a, double c) { return a.tape()->unary(Op::AddConst, a, a.value() + c, 1.0, c); }
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator-(double c, Var a) { return a.tape()->unary(Op::ConstSub, a, c - a.value(), -1.0, c); }
inline Var operator*(Var a, double c) { return a.tape()->unary(Op::MulConst, a, a.value() * c, c, c); }
inline Var operator*(double c, Var a) { return a * c; }
inline Var operator/(Var a, double c) { return a * (1.0 / c); }
inline Var operator/(double c, Var a) {
  const double av = a.value();
  return a.tape()->unary(Op::ConstDiv, a, c / av, -c / (av * av), c);
}

inline Var& operator+=(Var& a, Var b) { return a = a + b; }
inline Var& operator-=(Var& a, Var b) { return a = a - b; }
inline Var& operator*=(Var& a, Var b) { return a = a * b; }
inline Var& operator+=(Var& a, double c) { return a = a + c; }
inline Var& operator*=(Var& a, double c) { return a = a * c; }

inline Var square(Var a) {
  const double av = a.value();
  return a.tape()->unary(Op::Square, a, av * av, 2.0 * av);
}
inline double square(double a) { return a * a; }

inline Var pow(Var a, double p) {
  const double av = a.value();
  return a.tape()->unary(Op::PowConst, a, std::pow(av, p), p * std::pow(av, p - 1.0), p);
}
inline Var sqrt(Var a) {
  const double r = std::sqrt(a.value());
  return a.tape()->unary(Op::Sqrt, a, r, 0.5 / r);
}
inline Var exp(Var a) {
  const double e = std::exp(a.value());
  return a.tape()->unary(Op::Exp, a, e, e);
}
inline Var log(Var a) {
  const double av = a.value();
  return a.tape()->unary(Op::Log, a, std::log(av), 1.0 / av);
}
inline Var tanh(Var a) {
  const double t = std::tanh(a.value());
  return a.tape()->unary(Op::Tanh, a, t, 1.0 - t * t);
}
inline Var sin(Var a) {
  const double av = a.value();
  return a.tape()->unary(Op::Sin, a, std::sin(av), std::cos(av));
}
inline Var cos(Var a) {
  const double av = a.value();
  return a.tape()->unary(Op::Cos, a, std::cos(av), -std::sin(av));
}

/// max(lo, min(x, hi)); derivative 1 strictly inside and on the bounds, 0 outside.
inline Var clamp(Var a, double lo, double hi) {
  const double av = a.value();
  const double v = av < lo ? lo : (av > hi ? hi : av);
  const double d = (av < lo || av > hi) ? 0.0 : 1.0;
  return a.tape()->unary(Op::Clamp, a, v, d, lo, hi);
}
inline double clamp(double a, double lo, double hi) { return a < lo ? lo : (a > hi ? hi : a); }

/// Value and input derivatives of one output component at one point. The
/// scalar type is `double` for plain evaluation and `Var` when parameter
/// gradients must flow through the slots.
template <class T>
struct Jet {
  T u{};
  T u_t{};
  T u_x{};
  T u_xx{};
};

template <class T>
Jet<T> operator+(const Jet<T>& f, const Jet<T>& g) {
  return {f.u + g.u, f.u_t + g.u_t, f.u_x + g.u_x, f.u_xx + g.u_xx};
}

template <class T>
Jet<T> operator*(double a, const Jet<T>& f) {
  return {a * f.u, a * f.u_t, a * f.u_x, a * f.u_xx};
}

inline Jet<double> constant_jet(double c) { return {c, 0.0, 0.0, 0.0}; }

}  // namespace pinnverse::ad
