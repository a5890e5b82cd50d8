#include "otg/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "otg/errors.hpp"

namespace otg {

double theta(const DensityField& rho, std::size_t i, std::size_t j) {
  const auto nb = neighbor_nodes(rho.grid, i);
  if (std::find(nb.begin(), nb.end(), j) == nb.end()) throw NotNeighbors("theta: nodes are not lattice neighbors");
  return MeanWeight::value(rho.values[static_cast<Eigen::Index>(i)], rho.values[static_cast<Eigen::Index>(j)]);
}

double hamiltonian(const DensityField& rho, const Vec& S) {
  if (S.size() != rho.values.size()) throw GridMismatch("hamiltonian: potential and density sizes differ");
  const double inv_dx2 = 1.0 / (rho.grid.spacing() * rho.grid.spacing());
  // Each undirected edge appears twice in the double sum.
  double h = 0.0;
  for (const auto& e : edge_list(rho.grid)) {
    const auto a = static_cast<Eigen::Index>(e.tail);
    const auto b = static_cast<Eigen::Index>(e.head);
    const double dS = S[b] - S[a];
    h += dS * dS * MeanWeight::value(rho.values[a], rho.values[b]);
  }
  return 0.5 * h * inv_dx2;
}

void density_rate(const LatticeGrid& grid, const std::vector<Edge>& edges, const Vec& rho, const Vec& S, Vec& out) {
  const double inv_dx2 = 1.0 / (grid.spacing() * grid.spacing());
  out.setZero(rho.size());
  for (const auto& e : edges) {
    const auto a = static_cast<Eigen::Index>(e.tail);
    const auto b = static_cast<Eigen::Index>(e.head);
    const double flux = (S[b] - S[a]) * MeanWeight::value(rho[a], rho[b]) * inv_dx2;
    out[a] -= flux;
    out[b] += flux;
  }
}

void potential_rate(const LatticeGrid& grid, const std::vector<Edge>& edges, const Vec& S, Vec& out) {
  const double c = 0.5 * MeanWeight::partial / (grid.spacing() * grid.spacing());
  out.setZero(S.size());
  for (const auto& e : edges) {
    const auto a = static_cast<Eigen::Index>(e.tail);
    const auto b = static_cast<Eigen::Index>(e.head);
    const double dS = S[b] - S[a];
    const double k = c * dS * dS;
    out[a] -= k;
    out[b] -= k;
  }
}

Derivative rhs(const SpanningPath& path, const PhaseState& state) {
  const auto& grid = path.grid();
  if (!(state.rho.grid == grid)) throw GridMismatch("rhs: state lives on a different grid");
  if (!state.rho.values.allFinite() || !state.vhat.values.allFinite()) throw NonFiniteState("rhs: non-finite state");
  const Vec S = reconstruct_potential(path, state.vhat, 0.0);
  Derivative d;
  density_rate(grid, path.edges(), state.rho.values, S, d.drho);
  Vec dS;
  potential_rate(grid, path.edges(), S, dS);
  d.dvhat = restrict_potential(path, dS).values;
  return d;
}

double wasserstein_distance(const SpanningPath& path, const DensityField& mu, const ReducedVelocity& vhat0) {
  if (!(mu.grid == path.grid())) throw GridMismatch("wasserstein_distance: mu lives on a different grid");
  const Vec S0 = reconstruct_potential(path, vhat0, 0.0);
  return std::sqrt(2.0 * mu.grid.cell_volume() * hamiltonian(mu, S0));
}

}  // namespace otg
