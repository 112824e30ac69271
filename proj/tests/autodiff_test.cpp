#include "pinnverse/autodiff.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

namespace pinnverse::ad {
namespace {

TEST(Tape, QuadraticGradientIsTwiceTheInput) {
  Tape tape;
  const std::vector<double> p{0.5, -1.25, 3.0};
  std::vector<Var> vars;
  for (double v : p) vars.push_back(tape.variable(v));
  Var loss = square(vars[0]);
  for (std::size_t k = 1; k < vars.size(); ++k) loss = loss + square(vars[k]);
  const auto adj = tape.gradient(loss);
  for (std::size_t k = 0; k < p.size(); ++k) EXPECT_DOUBLE_EQ(adj[static_cast<std::size_t>(vars[k].index())], 2 * p[k]);
}

TEST(Tape, DisconnectedLeafGetsZeroGradient) {
  Tape tape;
  Var a = tape.variable(2.0);
  Var unused = tape.variable(7.0);
  Var loss = a * a * 3.0;
  const auto adj = tape.gradient(loss);
  EXPECT_DOUBLE_EQ(adj[static_cast<std::size_t>(a.index())], 12.0);
  EXPECT_EQ(adj[static_cast<std::size_t>(unused.index())], 0.0);
}

TEST(Tape, ReplayReproducesRecordedValuesBitwise) {
  Tape tape;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Var a = tape.variable(u(rng)), b = tape.variable(u(rng)), c = tape.variable(u(rng));
  Var r = tanh(a * b) + sin(c) / cos(a) - pow(b, 1.7) + sqrt(c) * exp(-a) + log(b + c);
  r = clamp(r, -0.5, 0.5) + 2.0 / r - (3.0 - square(r));
  (void)r;
  const auto replayed = tape.replay();
  ASSERT_EQ(replayed.size(), tape.size());
  for (std::size_t i = 0; i < tape.size(); ++i)
    EXPECT_EQ(replayed[i], tape.value(static_cast<Index>(i))) << "node " << i;
}

TEST(Tape, NonFiniteLossIsRejectedWithOrigin) {
  Tape tape;
  Var a = tape.variable(-1.0);
  Var bad = log(a) * 2.0;
  EXPECT_THROW(tape.gradient(bad), NumericalError);
  ASSERT_TRUE(tape.first_non_finite().has_value());
  EXPECT_EQ(tape.first_non_finite()->op, Op::Log);
  try {
    tape.gradient(bad);
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("log"), std::string::npos);
  }
}

TEST(Tape, ClearResetsState) {
  Tape tape;
  Var a = tape.variable(-1.0);
  (void)sqrt(a);
  tape.clear();
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(tape.first_non_finite().has_value());
}

TEST(Tape, ClampPassesGradientOnlyInside) {
  Tape tape;
  Var in = tape.variable(0.3), lo = tape.variable(-0.2), hi = tape.variable(0.9);
  Var s = clamp(in, 0.0, 0.7) + clamp(lo, 0.0, 0.7) + clamp(hi, 0.0, 0.7);
  const auto adj = tape.gradient(s);
  EXPECT_EQ(adj[static_cast<std::size_t>(in.index())], 1.0);
  EXPECT_EQ(adj[static_cast<std::size_t>(lo.index())], 0.0);
  EXPECT_EQ(adj[static_cast<std::size_t>(hi.index())], 0.0);
  EXPECT_DOUBLE_EQ(s.value(), 0.3 + 0.0 + 0.7);
}

// Every elementary op against a central difference at random smooth points.
TEST(Tape, ElementaryOpsMatchFiniteDifferences) {
  using F = std::function<Var(Var, Var)>;
  using G = std::function<double(double, double)>;
  const std::vector<std::pair<F, G>> cases = {
      {[](Var a, Var b) { return a * b + a / b - b; }, [](double a, double b) { return a * b + a / b - b; }},
      {[](Var a, Var b) { return tanh(a) * sin(b); }, [](double a, double b) { return std::tanh(a) * std::sin(b); }},
      {[](Var a, Var b) { return cos(a * b) + exp(a) * log(b); },
       [](double a, double b) { return std::cos(a * b) + std::exp(a) * std::log(b); }},
      {[](Var a, Var b) { return pow(a, 3.5) - sqrt(b) + 2.0 / a; },
       [](double a, double b) { return std::pow(a, 3.5) - std::sqrt(b) + 2.0 / a; }},
      {[](Var a, Var b) { return (1.0 - a) * square(b) - (-a); },
       [](double a, double b) { return (1.0 - a) * b * b + a; }},
  };
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.2, 1.8);
  for (const auto& [f, g] : cases) {
    for (int rep = 0; rep < 20; ++rep) {
      const double a0 = u(rng), b0 = u(rng);
      Tape tape;
      Var a = tape.variable(a0), b = tape.variable(b0);
      const auto adj = tape.gradient(f(a, b));
      const double h = 1e-6;
      const double fa = (g(a0 + h, b0) - g(a0 - h, b0)) / (2 * h);
      const double fb = (g(a0, b0 + h) - g(a0, b0 - h)) / (2 * h);
      EXPECT_NEAR(adj[static_cast<std::size_t>(a.index())], fa, 1e-6 * std::max(1.0, std::abs(fa)));
      EXPECT_NEAR(adj[static_cast<std::size_t>(b.index())], fb, 1e-6 * std::max(1.0, std::abs(fb)));
    }
  }
}

TEST(Jet, ConstantHasZeroDerivativeSlots) {
  const Jet<double> c = constant_jet(4.2);
  EXPECT_EQ(c.u, 4.2);
  EXPECT_EQ(c.u_t, 0.0);
  EXPECT_EQ(c.u_x, 0.0);
  EXPECT_EQ(c.u_xx, 0.0);
}

TEST(Jet, SlotsAreLinear) {
  const Jet<double> f{1.0, 2.0, -3.0, 0.5};
  const Jet<double> g{-0.25, 4.0, 1.5, -2.0};
  const double a = 1.5, b = -0.75;
  const Jet<double> lhs = a * f + b * g;
  EXPECT_DOUBLE_EQ(lhs.u, a * f.u + b * g.u);
  EXPECT_DOUBLE_EQ(lhs.u_t, a * f.u_t + b * g.u_t);
  EXPECT_DOUBLE_EQ(lhs.u_x, a * f.u_x + b * g.u_x);
  EXPECT_DOUBLE_EQ(lhs.u_xx, a * f.u_xx + b * g.u_xx);
}

}  // namespace
}  // namespace pinnverse::ad
