#pragma once

// The four benchmark systems: residual operators, initial/boundary data,
// parameter bounds, observation schedules, and the classical forward solvers
// used to generate data and to validate estimated parameters.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pinnverse/autodiff.hpp"
#include "pinnverse/error.hpp"
#include "pinnverse/network.hpp"
#include "pinnverse/ode_solver.hpp"

namespace pinnverse {

enum class ProblemKind { Ode, Pde };
enum class BoundaryKind { None, DirichletZero, NeumannZero };
enum class DataLossKind { Absolute, Relative };

inline std::string_view to_string(DataLossKind k) { return k == DataLossKind::Absolute ? "absolute" : "relative"; }

struct CollocationCounts {
  std::size_t interior = 16384;
  std::size_t initial = 1024;
  std::size_t boundary = 1024;
  std::size_t skip = 1;  // leading Sobol points dropped
};

struct ProblemSpec {
  std::string name;
  ProblemKind kind = ProblemKind::Ode;
  int state_dim = 1;
  int param_dim = 1;
  std::vector<std::string> param_names;
  Interval space{0.0, 0.0};  // unused for ODEs
  double horizon = 1.0;
  std::vector<double> eta_true, eta_lower, eta_upper;
  BoundaryKind boundary = BoundaryKind::None;
  // Observation schedule: every (x, t) pair from these lists, every listed component.
  std::vector<double> observation_times;
  std::vector<double> observation_x{0.0};
  std::vector<int> observed_components;
  DataLossKind data_loss = DataLossKind::Relative;
  std::size_t default_epochs = 500000;
  CollocationCounts default_counts;
  bool fourier_features = false;
  std::size_t mesh_nodes = 0;  // method-of-lines grid (PDEs)

  bool is_pde() const { return kind == ProblemKind::Pde; }
  int residual_order() const { return is_pde() ? 2 : 1; }
};

/// Solution of the forward problem on a time list (and a spatial grid for PDEs).
struct ReferenceSolution {
  std::string solver;
  std::vector<double> times;
  std::vector<double> grid;  // empty for ODEs
  int components = 1;
  // One vector per time. ODE: length m. PDE: component-major, c * nodes + i.
  std::vector<Eigen::VectorXd> states;
  double rtol = 0.0;
  double atol = 0.0;

  /// Value of `component` at time index `k`; PDEs interpolate linearly in x.
  double at(std::size_t k, int component, double x = 0.0) const {
    const Eigen::VectorXd& s = states.at(k);
    if (grid.empty()) return s[component];
    const auto nodes = static_cast<Eigen::Index>(grid.size());
    const double lo = grid.front(), dx = (grid.back() - lo) / static_cast<double>(nodes - 1);
    double pos = (x - lo) / dx;
    pos = std::clamp(pos, 0.0, static_cast<double>(nodes - 1));
    auto i = static_cast<Eigen::Index>(std::floor(pos));
    if (i >= nodes - 1) i = nodes - 2;
    const double w = pos - static_cast<double>(i);
    const Eigen::Index base = component * nodes;
    if (w == 0.0) return s[base + i];
    return (1.0 - w) * s[base + i] + w * s[base + i + 1];
  }

  std::size_t time_index(double t) const {
    for (std::size_t k = 0; k < times.size(); ++k)
      if (std::abs(times[k] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return k;
    throw InvalidArgument("ReferenceSolution: time " + std::to_string(t) + " was not solved for");
  }
};

struct SolveOptions {
  double rtol = 1e-9;
  double atol = 1e-11;
  std::size_t mesh_nodes = 0;  // 0: problem default
  std::optional<Interval> space;  // PDEs: solve on a different spatial domain
};

// ---------------------------------------------------------------------------
// Residual operators. Each returns rhs(u, eta) - u_t (or the PDE equivalent).

/// A <-> B + C (k1, k2), C <-> D (k3, k4).
template <class T>
std::array<T, 4> reaction_rhs(std::span<const T> u, std::span<const T> eta) {
  const T& a = u[0];
  const T& b = u[1];
  const T& c = u[2];
  const T& d = u[3];
  const T forward = eta[0] * a - eta[1] * (b * c);
  const T exchange = eta[2] * c - eta[3] * d;
  return {-forward, forward, forward - exchange, exchange};
}

template <class T>
std::array<T, 4> reaction_residual(double /*t*/, std::span<const T> u, std::span<const T> eta, std::span<const T> u_t) {
  auto r = reaction_rhs<T>(u, eta);
  for (std::size_t i = 0; i < 4; ++i) r[i] = r[i] - u_t[i];
  return r;
}

template <class T>
std::array<T, 2> fhn_rhs(std::span<const T> u, std::span<const T> eta) {
  const T& v = u[1];
  if (ad::value_of(eta[2]) == 0.0) throw InvalidArgument("FitzHugh-Nagumo: time-scale parameter r must be nonzero");
  const T cubic = u[0] * u[0] * u[0];
  return {u[0] - cubic / 3.0 - v, (u[0] + eta[0] - eta[1] * v) / eta[2]};
}

template <class T>
std::array<T, 2> fhn_residual(double /*t*/, std::span<const T> u, std::span<const T> eta, std::span<const T> u_t) {
  auto r = fhn_rhs<T>(u, eta);
  return {r[0] - u_t[0], r[1] - u_t[1]};
}

/// D u_xx + rho u (1 - u) - u_t
template <class T>
T fisher_residual(double /*x*/, double /*t*/, const T& u, std::span<const T> eta, const T& u_t, const T& u_xx) {
  return eta[0] * u_xx + eta[1] * (u * (1.0 - u)) - u_t;
}

/// u_t + u u_x - nu u_xx
template <class T>
T burgers_residual(double /*x*/, double /*t*/, const T& u, std::span<const T> eta, const T& u_t, const T& u_x,
                   const T& u_xx) {
  return u_t + u * u_x - eta[0] * u_xx;
}

// ---------------------------------------------------------------------------

class Problem {
 public:
  explicit Problem(ProblemSpec spec) : spec_(std::move(spec)) {}
  virtual ~Problem() = default;

  const ProblemSpec& spec() const { return spec_; }

  /// F evaluated on jets of every state component; `out` has state_dim entries.
  virtual void residual(const SpaceTimePoint& p, std::span<const ad::Jet<double>> u, std::span<const double> eta,
                        std::span<double> out) const = 0;
  virtual void residual(const SpaceTimePoint& p, std::span<const ad::Jet<ad::Var>> u, std::span<const ad::Var> eta,
                        std::span<ad::Var> out) const = 0;

  /// h(x): state at t = 0.
  virtual std::vector<double> initial(double x) const = 0;

  /// Forward solve at parameters `eta` on the ascending list `t_eval`.
  virtual ReferenceSolution solve(std::span<const double> eta, std::span<const double> t_eval,
                                  const SolveOptions& opt = {}) const = 0;

  /// Default network layout for this benchmark.
  NetworkSpec network_spec(int hidden_layers = 2, int hidden_width = 20, int fourier_frequencies = 10) const {
    NetworkSpec n;
    n.input_dim = spec_.is_pde() ? 2 : 1;
    n.hidden_layers = hidden_layers;
    n.hidden_width = hidden_width;
    n.output_dim = spec_.state_dim;
    n.time = {0.0, spec_.horizon};
    if (spec_.is_pde()) n.space = spec_.space;
    if (spec_.fourier_features && fourier_frequencies > 0)
      n.fourier = FourierConfig::harmonics(fourier_frequencies, 0.5 * spec_.space.width());
    return n;
  }

  /// Throws unless the parameter vector has the right size.
  void check_eta(std::span<const double> eta) const {
    if (static_cast<int>(eta.size()) != spec_.param_dim)
      throw InvalidArgument(spec_.name + ": expected " + std::to_string(spec_.param_dim) + " parameters");
  }

 private:
  ProblemSpec spec_;
};

/// Implements both residual overloads from one `residual_impl<T>` template.
template <class Derived>
class ProblemBase : public Problem {
 public:
  using Problem::Problem;

  void residual(const SpaceTimePoint& p, std::span<const ad::Jet<double>> u, std::span<const double> eta,
                std::span<double> out) const override {
    static_cast<const Derived&>(*this).template residual_impl<double>(p, u, eta, out);
  }
  void residual(const SpaceTimePoint& p, std::span<const ad::Jet<ad::Var>> u, std::span<const ad::Var> eta,
                std::span<ad::Var> out) const override {
    static_cast<const Derived&>(*this).template residual_impl<ad::Var>(p, u, eta, out);
  }
};

/// ODE benchmarks: residual is rhs(u) - u_t, forward solve by Dormand-Prince.
template <class Derived, int M>
class OdeProblem : public ProblemBase<Derived> {
 public:
  using ProblemBase<Derived>::ProblemBase;

  template <class T>
  void residual_impl(const SpaceTimePoint& p, std::span<const ad::Jet<T>> u, std::span<const T> eta,
                     std::span<T> out) const {
    std::array<T, M> state, rate;
    for (int i = 0; i < M; ++i) state[i] = u[i].u, rate[i] = u[i].u_t;
    const auto r = Derived::template residual_fn<T>(p.t, std::span<const T>(state), eta, std::span<const T>(rate));
    for (int i = 0; i < M; ++i) out[i] = r[i];
  }

  ReferenceSolution solve(std::span<const double> eta, std::span<const double> t_eval,
                          const SolveOptions& opt = {}) const override {
    this->check_eta(eta);
    const std::vector<double> eta_copy(eta.begin(), eta.end());
    const OdeRhs rhs = [&eta_copy](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
      const auto r = Derived::template rhs_fn<double>(std::span<const double>(y.data(), M), eta_copy);
      for (int i = 0; i < M; ++i) dy[i] = r[i];
    };
    const auto h = this->initial(0.0);
    const Eigen::VectorXd y0 = Eigen::Map<const Eigen::VectorXd>(h.data(), M);
    ReferenceSolution sol;
    sol.solver = "dopri5";
    sol.times.assign(t_eval.begin(), t_eval.end());
    sol.components = M;
    sol.rtol = opt.rtol;
    sol.atol = opt.atol;
    sol.states = integrate_dopri5(rhs, y0, 0.0, t_eval, OdeOptions{opt.rtol, opt.atol});
    return sol;
  }
};

class ReactionProblem final : public OdeProblem<ReactionProblem, 4> {
 public:
  ReactionProblem() : OdeProblem(make_spec()) {}

  template <class T>
  static std::array<T, 4> rhs_fn(std::span<const T> u, std::span<const T> eta) {
    return reaction_rhs<T>(u, eta);
  }
  template <class T>
  static std::array<T, 4> residual_fn(double t, std::span<const T> u, std::span<const T> eta, std::span<const T> u_t) {
    return reaction_residual<T>(t, u, eta, u_t);
  }

  std::vector<double> initial(double) const override { return {1.0, 0.0, 0.2, 0.0}; }

  static ProblemSpec make_spec() {
    ProblemSpec s;
    s.name = "reaction";
    s.kind = ProblemKind::Ode;
    s.state_dim = 4;
    s.param_dim = 4;
    s.param_names = {"k1", "k2", "k3", "k4"};
    s.horizon = 10.0;
    s.eta_true = {1.5, 0.5, 1.0, 0.1};
    s.eta_lower = {0.0, 0.0, 0.0, 0.0};
    s.eta_upper = {10.0, 4.0, 7.0, 0.7};
    for (int k = 1; k <= 10; ++k) s.observation_times.push_back(k * s.horizon / 10.0);
    s.observed_components = {0, 1, 2, 3};
    s.data_loss = DataLossKind::Relative;
    s.default_epochs = 500000;
    s.default_counts = {16384, 1, 0, 1};
    return s;
  }
};

class FitzHughNagumoProblem final : public OdeProblem<FitzHughNagumoProblem, 2> {
 public:
  FitzHughNagumoProblem() : OdeProblem(make_spec()) {}

  template <class T>
  static std::array<T, 2> rhs_fn(std::span<const T> u, std::span<const T> eta) {
    return fhn_rhs<T>(u, eta);
  }
  template <class T>
  static std::array<T, 2> residual_fn(double t, std::span<const T> u, std::span<const T> eta, std::span<const T> u_t) {
    return fhn_residual<T>(t, u, eta, u_t);
  }

  std::vector<double> initial(double) const override { return {0.0, 0.0}; }

  static ProblemSpec make_spec() {
    ProblemSpec s;
    s.name = "fhn";
    s.kind = ProblemKind::Ode;
    s.state_dim = 2;
    s.param_dim = 3;
    s.param_names = {"a", "b", "r"};
    s.horizon = 40.0;
    s.eta_true = {0.7, 0.8, 12.5};
    s.eta_lower = {0.0, 0.0, 0.0};
    s.eta_upper = {10.0, 10.0, 100.0};
    for (int k = 1; k <= 7; ++k) s.observation_times.push_back(k * s.horizon / 7.0);
    s.observed_components = {0, 1};
    s.data_loss = DataLossKind::Relative;
    s.default_epochs = 500000;
    s.default_counts = {10000, 1, 0, 1};
    return s;
  }
};

/// Method-of-lines PDE benchmarks on a uniform grid, integrated by Dormand-Prince.
template <class Derived>
class PdeProblem : public ProblemBase<Derived> {
 public:
  using ProblemBase<Derived>::ProblemBase;

  std::vector<double> grid(std::size_t nodes, std::optional<Interval> domain = std::nullopt) const {
    const Interval dom = domain.value_or(this->spec().space);
    std::vector<double> g(nodes);
    for (std::size_t i = 0; i < nodes; ++i)
      g[i] = dom.lo + dom.width() * static_cast<double>(i) / static_cast<double>(nodes - 1);
    return g;
  }

  ReferenceSolution solve(std::span<const double> eta, std::span<const double> t_eval,
                          const SolveOptions& opt = {}) const override {
    this->check_eta(eta);
    const std::size_t nodes = opt.mesh_nodes ? opt.mesh_nodes : this->spec().mesh_nodes;
    if (nodes < 5) throw InvalidArgument(this->spec().name + ": at least 5 mesh nodes required");
    ReferenceSolution sol;
    sol.solver = "mol-dopri5";
    sol.grid = grid(nodes, opt.space);
    sol.times.assign(t_eval.begin(), t_eval.end());
    sol.components = 1;
    sol.rtol = opt.rtol;
    sol.atol = opt.atol;
    Eigen::VectorXd u0(static_cast<Eigen::Index>(nodes));
    for (std::size_t i = 0; i < nodes; ++i) u0[static_cast<Eigen::Index>(i)] = this->initial(sol.grid[i])[0];
    const double dx = sol.grid[1] - sol.grid[0];
    const std::vector<double> eta_copy(eta.begin(), eta.end());
    static_cast<const Derived&>(*this).check_mesh(eta_copy, u0, dx);
    const OdeRhs rhs = [&](double, const Eigen::VectorXd& u, Eigen::VectorXd& du) {
      static_cast<const Derived&>(*this).semi_discrete(eta_copy, dx, u, du);
    };
    sol.states = integrate_dopri5(rhs, u0, 0.0, t_eval, OdeOptions{opt.rtol, opt.atol});
    return sol;
  }
};

class FisherKppProblem final : public PdeProblem<FisherKppProblem> {
 public:
  FisherKppProblem() : PdeProblem(make_spec()) {}

  template <class T>
  void residual_impl(const SpaceTimePoint& p, std::span<const ad::Jet<T>> u, std::span<const T> eta,
                     std::span<T> out) const {
    out[0] = fisher_residual<T>(p.x, p.t, u[0].u, eta, u[0].u_t, u[0].u_xx);
  }

  std::vector<double> initial(double x) const override { return {0.1 * std::exp(-x)}; }

  void check_mesh(const std::vector<double>& eta, const Eigen::VectorXd&, double) const {
    if (!(eta[0] >= 0.0)) throw SolverError("fisher: diffusion coefficient must be non-negative");
  }

  /// Second-order central differences, zero-flux ends via mirrored ghost nodes.
  void semi_discrete(const std::vector<double>& eta, double dx, const Eigen::VectorXd& u, Eigen::VectorXd& du) const {
    const Eigen::Index n = u.size();
    const double d = eta[0] / (dx * dx), rho = eta[1];
    du[0] = d * 2.0 * (u[1] - u[0]) + rho * u[0] * (1.0 - u[0]);
    for (Eigen::Index i = 1; i + 1 < n; ++i) du[i] = d * (u[i - 1] - 2.0 * u[i] + u[i + 1]) + rho * u[i] * (1.0 - u[i]);
    du[n - 1] = d * 2.0 * (u[n - 2] - u[n - 1]) + rho * u[n - 1] * (1.0 - u[n - 1]);
  }

  static ProblemSpec make_spec() {
    ProblemSpec s;
    s.name = "fisher";
    s.kind = ProblemKind::Pde;
    s.state_dim = 1;
    s.param_dim = 2;
    s.param_names = {"D", "rho"};
    s.space = {0.0, 10.0};
    s.horizon = 2.0;
    s.eta_true = {0.5, 1.0};
    s.eta_lower = {0.1, 0.5};
    s.eta_upper = {0.5, 6.0};
    s.boundary = BoundaryKind::NeumannZero;
    s.observation_times = {1.0, 2.0};
    s.observation_x.clear();
    for (int k = 0; k < 9; ++k) s.observation_x.push_back(10.0 * k / 8.0);
    s.observed_components = {0};
    s.data_loss = DataLossKind::Absolute;
    s.default_epochs = 300000;
    s.default_counts = {16384, 1024, 1024, 1};
    s.mesh_nodes = 1001;
    return s;
  }
};

class BurgersProblem final : public PdeProblem<BurgersProblem> {
 public:
  BurgersProblem() : PdeProblem(make_spec()) {}

  template <class T>
  void residual_impl(const SpaceTimePoint& p, std::span<const ad::Jet<T>> u, std::span<const T> eta,
                     std::span<T> out) const {
    out[0] = burgers_residual<T>(p.x, p.t, u[0].u, eta, u[0].u_t, u[0].u_x, u[0].u_xx);
  }

  std::vector<double> initial(double x) const override { return {-std::sin(std::numbers::pi * x)}; }

  /// Cell Peclet number max|u| dx / nu must not exceed 2.
  void check_mesh(const std::vector<double>& eta, const Eigen::VectorXd& u0, double dx) const {
    const double nu = eta[0];
    if (!(nu > 0.0)) throw SolverError("burgers: viscosity must be positive");
    const double peclet = u0.cwiseAbs().maxCoeff() * dx / nu;
    if (peclet > 2.0)
      throw SolverError("burgers: mesh too coarse for nu = " + std::to_string(nu) + " (cell Peclet " +
                        std::to_string(peclet) + " > 2); refine the grid");
  }

  /// Conservative central convection d(u^2/2)/dx plus central diffusion; u = 0 at both ends.
  void semi_discrete(const std::vector<double>& eta, double dx, const Eigen::VectorXd& u, Eigen::VectorXd& du) const {
    const Eigen::Index n = u.size();
    const double nu = eta[0] / (dx * dx), c = 1.0 / (4.0 * dx);
    du[0] = 0.0;
    du[n - 1] = 0.0;
    for (Eigen::Index i = 1; i + 1 < n; ++i)
      du[i] = -c * (u[i + 1] * u[i + 1] - u[i - 1] * u[i - 1]) + nu * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
  }

  static ProblemSpec make_spec() {
    ProblemSpec s;
    s.name = "burgers";
    s.kind = ProblemKind::Pde;
    s.state_dim = 1;
    s.param_dim = 1;
    s.param_names = {"nu"};
    s.space = {-1.0, 1.0};
    s.horizon = 0.5;
    s.eta_true = {0.01};
    s.eta_lower = {0.0};
    s.eta_upper = {0.07};
    s.boundary = BoundaryKind::DirichletZero;
    s.observation_times = {0.2, 0.4};
    s.observation_x.clear();
    for (int k = 1; k <= 7; ++k) s.observation_x.push_back(-1.0 + 2.0 * k / 8.0);
    s.observed_components = {0};
    s.data_loss = DataLossKind::Absolute;
    s.default_epochs = 150000;
    s.default_counts = {16384, 1024, 1024, 1};
    s.fourier_features = true;
    s.mesh_nodes = 2001;
    return s;
  }
};

inline const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names{"reaction", "fhn", "fisher", "burgers"};
  return names;
}

inline std::unique_ptr<Problem> make_problem(std::string_view name) {
  if (name == "reaction") return std::make_unique<ReactionProblem>();
  if (name == "fhn" || name == "fitzhugh-nagumo") return std::make_unique<FitzHughNagumoProblem>();
  if (name == "fisher" || name == "fisher-kpp") return std::make_unique<FisherKppProblem>();
  if (name == "burgers") return std::make_unique<BurgersProblem>();
  throw InvalidArgument("unknown benchmark '" + std::string(name) + "'");
}

}  // namespace pinnverse
