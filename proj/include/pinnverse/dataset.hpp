#pragma once

// Synthetic observations with heteroscedastic Gaussian noise, and their CSV
// form (columns x, t, component_index, value, sigma).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pinnverse/error.hpp"
#include "pinnverse/problems.hpp"

namespace pinnverse {

struct Observation {
  double x = 0.0;
  double t = 0.0;
  int component = 0;
  double value = 0.0;
  double sigma = 0.0;  // noise scale used to draw `value`
};

struct Dataset {
  std::vector<Observation> observations;
  double noise_level = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return observations.size(); }

  /// Distinct observation times, ascending.
  std::vector<double> times() const {
    std::vector<double> t;
    for (const auto& o : observations) t.push_back(o.t);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
  }

  /// Distinct (x, t) locations in first-seen order, and for every observation
  /// the index of its location.
  std::vector<SpaceTimePoint> locations(std::vector<std::size_t>* index_of = nullptr) const {
    std::vector<SpaceTimePoint> pts;
    if (index_of) index_of->clear();
    for (const auto& o : observations) {
      auto it = std::find_if(pts.begin(), pts.end(), [&](const SpaceTimePoint& p) { return p.x == o.x && p.t == o.t; });
      if (it == pts.end()) {
        pts.push_back({o.x, o.t});
        it = pts.end() - 1;
      }
      if (index_of) index_of->push_back(static_cast<std::size_t>(it - pts.begin()));
    }
    return pts;
  }
};

/// Values of a reference solution at every observation of the problem's schedule.
inline std::vector<Observation> noiseless_observations(const Problem& problem, const ReferenceSolution& sol) {
  const ProblemSpec& s = problem.spec();
  std::vector<Observation> obs;
  for (double t : s.observation_times) {
    const std::size_t k = sol.time_index(t);
    for (double x : s.observation_x)
      for (int c : s.observed_components) obs.push_back({x, t, c, sol.at(k, c, x), 0.0});
  }
  return obs;
}

/// Observations of the forward solution at `eta` perturbed as y + zeta*|y|*N(0, 1).
inline Dataset generate_dataset(const Problem& problem, std::span<const double> eta, double zeta, std::uint64_t seed,
                                const SolveOptions& opt = {}) {
  if (!(zeta >= 0.0 && zeta <= 0.3)) throw InvalidArgument("generate_dataset: noise level must lie in [0, 0.3]");
  const ReferenceSolution sol = problem.solve(eta, problem.spec().observation_times, opt);
  Dataset d;
  d.noise_level = zeta;
  d.seed = seed;
  d.observations = noiseless_observations(problem, sol);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& o : d.observations) {
    o.sigma = zeta * std::abs(o.value);
    const double z = normal(rng);  // drawn for every point so streams stay aligned across zeta
    o.value += o.sigma * z;
  }
  return d;
}

inline void write_dataset_csv(const Dataset& d, std::ostream& os) {
  os << "x,t,component_index,value,sigma\n" << std::setprecision(17);
  for (const auto& o : d.observations) os << o.x << ',' << o.t << ',' << o.component << ',' << o.value << ',' << o.sigma << '\n';
}

inline void write_dataset_csv(const Dataset& d, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot open '" + path + "' for writing");
  write_dataset_csv(d, os);
}

inline Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("x,t,component_index,value,sigma", 0) != 0)
    throw InvalidArgument("dataset CSV: missing header 'x,t,component_index,value,sigma'");
  Dataset d;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Observation o;
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    if (!(ls >> o.x >> c1 >> o.t >> c2 >> o.component >> c3 >> o.value >> c4 >> o.sigma) || c1 != ',' || c2 != ',' ||
        c3 != ',' || c4 != ',')
      throw InvalidArgument("dataset CSV: malformed row " + std::to_string(row));
    d.observations.push_back(o);
  }
  return d;
}

}  // namespace pinnverse
