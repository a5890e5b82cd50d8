#pragma once

#include <random>

#include "otg/density.hpp"
#include "otg/grid.hpp"

namespace otg::testing {

inline Vec uniform_vec(std::size_t n, double lo, double hi, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = u(rng);
  return v;
}

// Strictly positive density with unit mass.
inline DensityField random_density(const LatticeGrid& g, std::mt19937& rng, double lo = 0.5, double hi = 1.5) {
  const Vec raw = uniform_vec(g.node_count(), lo, hi, rng);
  return normalized(g, raw);
}

}  // namespace otg::testing
