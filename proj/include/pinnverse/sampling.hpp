#pragma once

// Sobol points (first two dimensions, Joe-Kuo direction numbers, Gray-code
// order) and the fixed collocation sets built from them.

#include <array>
#include <cstdint>
#include <vector>

#include "pinnverse/error.hpp"
#include "pinnverse/network.hpp"
#include "pinnverse/problems.hpp"

namespace pinnverse {

namespace detail {

inline constexpr int kSobolBits = 32;

// Dimension 1 is the van der Corput sequence; dimension 2 uses the primitive
// polynomial x + 1 (s = 1, a = 0, m_1 = 1), so m_k = 2 m_{k-1} xor m_{k-1}.
inline std::array<std::array<std::uint32_t, kSobolBits>, 2> sobol_directions() {
  std::array<std::array<std::uint32_t, kSobolBits>, 2> v{};
  std::uint32_t m = 1;
  for (int k = 0; k < kSobolBits; ++k) {
    v[0][k] = std::uint32_t{1} << (kSobolBits - 1 - k);
    if (k > 0) m = (m << 1) ^ m;
    v[1][k] = m << (kSobolBits - 1 - k);
  }
  return v;
}

inline int rightmost_zero_bit(std::uint64_t n) {
  int c = 0;
  while (n & 1) n >>= 1, ++c;
  return c;
}

}  // namespace detail

/// Row-major list of `n` points in [0, 1)^dim after dropping the first `skip`.
inline std::vector<double> sobol(int dim, std::size_t n, std::size_t skip = 1) {
  if (dim < 1 || dim > 2) throw InvalidArgument("sobol: only dimensions 1 and 2 are supported");
  if (skip + n > (std::uint64_t{1} << detail::kSobolBits)) throw InvalidArgument("sobol: sequence exhausted");
  static const auto v = detail::sobol_directions();
  std::vector<double> out;
  out.reserve(n * static_cast<std::size_t>(dim));
  std::array<std::uint32_t, 2> x{0, 0};
  constexpr double scale = 1.0 / 4294967296.0;
  for (std::uint64_t i = 0; i < skip + n; ++i) {
    if (i >= skip)
      for (int d = 0; d < dim; ++d) out.push_back(x[d] * scale);
    const int c = detail::rightmost_zero_bit(i);
    for (int d = 0; d < dim; ++d) x[d] ^= v[d][c];
  }
  return out;
}

struct CollocationSet {
  std::vector<SpaceTimePoint> interior;
  std::vector<SpaceTimePoint> initial;
  std::vector<SpaceTimePoint> boundary;
};

/// Interior points fill the space-time box; IC points sit at t = 0; BC points
/// are split evenly between the two faces, the left face taking its times
/// from the first Sobol coordinate and the right face from the second.
inline CollocationSet build_collocation(const ProblemSpec& spec, const CollocationCounts& counts) {
  if (counts.interior == 0) throw InvalidArgument("build_collocation: interior count must be positive");
  CollocationSet set;
  const double T = spec.horizon;
  if (!spec.is_pde()) {
    for (double u : sobol(1, counts.interior, counts.skip)) set.interior.push_back({0.0, u * T});
    set.initial.assign(counts.initial, {0.0, 0.0});
    return set;
  }

  const Interval& dom = spec.space;
  const auto p = sobol(2, counts.interior, counts.skip);
  for (std::size_t i = 0; i < counts.interior; ++i)
    set.interior.push_back({dom.lo + p[2 * i] * dom.width(), p[2 * i + 1] * T});
  for (double u : sobol(1, counts.initial, counts.skip)) set.initial.push_back({dom.lo + u * dom.width(), 0.0});

  if (spec.boundary != BoundaryKind::None && counts.boundary > 0) {
    if (counts.boundary % 2 != 0) throw InvalidArgument("build_collocation: boundary count must be even");
    const std::size_t half = counts.boundary / 2;
    const auto q = sobol(2, half, counts.skip);
    for (std::size_t i = 0; i < half; ++i) set.boundary.push_back({dom.lo, q[2 * i] * T});
    for (std::size_t i = 0; i < half; ++i) set.boundary.push_back({dom.hi, q[2 * i + 1] * T});
  }
  return set;
}

}  // namespace pinnverse
