#pragma once

#include "otg/density.hpp"
#include "otg/grid.hpp"

namespace otg {

struct PhaseState {
  DensityField rho;
  ReducedVelocity vhat;
  double time = 0.0;
};

struct Derivative {
  Vec drho;
  Vec dvhat;
};

/// Edge weight. Only the arithmetic mean is implemented; the partial
/// derivative with respect to either endpoint is 1/2.
struct MeanWeight {
  static double value(double rho_i, double rho_j) { return 0.5 * (rho_i + rho_j); }
  static constexpr double partial = 0.5;
};

/// theta_ij = (rho_i + rho_j) / 2 for j in N(i).
double theta(const DensityField& rho, std::size_t i, std::size_t j);

/// 1/4 sum_i sum_{j in N(i)} (S_i - S_j)^2 / dx^2 theta_ij.
double hamiltonian(const DensityField& rho, const Vec& S);

/// dH/dS: the continuity equation in (rho, S) variables. `out` is overwritten.
void density_rate(const LatticeGrid& grid, const std::vector<Edge>& edges, const Vec& rho, const Vec& S, Vec& out);

/// -dH/drho, which depends on S only. `out` is overwritten.
void potential_rate(const LatticeGrid& grid, const std::vector<Edge>& edges, const Vec& S, Vec& out);

/// Reduced right-hand side (drho/dt, dvhat/dt).
Derivative rhs(const SpanningPath& path, const PhaseState& state);

/// sqrt(2 dx^d H(mu, S0)) with S0 reconstructed from vhat0. The dx^d factor
/// is the quadrature weight that turns the node sum into the kinetic energy
/// integral, so the value converges to the continuum W2 distance.
double wasserstein_distance(const SpanningPath& path, const DensityField& mu, const ReducedVelocity& vhat0);

}  // namespace otg
