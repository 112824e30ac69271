#pragma once

// Adan (adaptive Nesterov momentum). Coefficients follow the "weight on new
// information" convention: m <- (1 - b1) m + b1 g.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pinnverse/error.hpp"

namespace pinnverse {

struct AdanOptions {
  double beta1 = 0.02;
  double beta2 = 0.08;
  double beta3 = 0.01;
  double epsilon = 1e-8;
  double weight_decay = 0.0;

  void validate() const {
    for (double b : {beta1, beta2, beta3})
      if (!(b > 0.0 && b <= 1.0)) throw InvalidArgument("adan: decay coefficients must lie in (0, 1]");
    if (!(epsilon > 0.0)) throw InvalidArgument("adan: epsilon must be positive");
    if (!(weight_decay >= 0.0)) throw InvalidArgument("adan: weight decay must be nonnegative");
  }
};

class AdanState {
 public:
  explicit AdanState(std::size_t n = 0, AdanOptions opt = {}) : opt_(opt), m_(n, 0.0), v_(n, 0.0), n_(n, 0.0), prev_(n, 0.0) {
    opt_.validate();
  }

  std::size_t size() const { return m_.size(); }
  std::uint64_t steps() const { return step_; }
  const AdanOptions& options() const { return opt_; }

  /// Advances the moment estimates with `grad` and returns the parameter
  /// change for learning rate `alpha`. With weight decay the change also
  /// includes the decoupled shrinkage of `params`.
  std::vector<double> step(std::span<const double> grad, double alpha, std::span<const double> params = {}) {
    if (grad.size() != m_.size()) throw InvalidArgument("adan: gradient size differs from state size");
    if (opt_.weight_decay > 0.0 && params.size() != grad.size())
      throw InvalidArgument("adan: weight decay needs the current parameters");
    ++step_;
    const double b1 = opt_.beta1, b2 = opt_.beta2, b3 = opt_.beta3;
    const auto k = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(1.0 - b1, k);
    const double c2 = 1.0 - std::pow(1.0 - b2, k);
    const double c3 = 1.0 - std::pow(1.0 - b3, k);
    std::vector<double> delta(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double g = grad[i];
      const double diff = step_ == 1 ? 0.0 : g - prev_[i];
      m_[i] = (1.0 - b1) * m_[i] + b1 * g;
      v_[i] = (1.0 - b2) * v_[i] + b2 * diff;
      const double z = g + (1.0 - b2) * diff;
      n_[i] = (1.0 - b3) * n_[i] + b3 * z * z;
      prev_[i] = g;
      const double d = -alpha * (m_[i] / c1 + (1.0 - b2) * v_[i] / c2) / (std::sqrt(n_[i] / c3) + opt_.epsilon);
      if (opt_.weight_decay > 0.0) {
        const double p = params[i];
        delta[i] = (p + d) / (1.0 + alpha * opt_.weight_decay) - p;
      } else {
        delta[i] = d;
      }
    }
    return delta;
  }

 private:
  AdanOptions opt_;
  std::vector<double> m_, v_, n_, prev_;
  std::uint64_t step_ = 0;
};

}  // namespace pinnverse
