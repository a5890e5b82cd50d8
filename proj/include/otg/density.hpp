#pragma once

#include <variant>
#include <vector>

#include "otg/grid.hpp"

namespace otg {

/// Node values of a probability density on a lattice. The quadrature is the
/// plain node sum, so a valid field has sum(values) * dx^d == 1 and no
/// negative entries. Transient Newton iterates may violate either; call
/// is_valid() where it matters.
struct DensityField {
  LatticeGrid grid;
  Vec values;

  double mass() const { return values.sum() * grid.cell_volume(); }
  double min() const { return values.minCoeff(); }
  bool is_valid(double tol = -1.0) const;
};

// exp(-sum_k rates[k] (x_k - centers[k])^2), per-axis parameters in x1, x2, ... order.
struct GaussianBump {
  std::vector<double> rates;
  std::vector<double> centers;
  double weight = 1.0;
};

struct GaussianSpec {
  std::vector<double> rates;
  std::vector<double> centers;
};

// Sum of Gaussian bumps, e.g. the two-bump target.
struct GaussianMixtureSpec {
  std::vector<GaussianBump> bumps;
};

// exp(-sum_k rates[k] |x_k - centers[k]|)
struct LaplaceSpec {
  std::vector<double> rates;
  std::vector<double> centers;
};

struct UniformSpec {};

// sum_k (x_k - root_lo)^2 (x_k - root_hi)^2
struct PolynomialSpec {
  double root_lo = -1.0;
  double root_hi = 3.0;
};

// det(I - D^2 phi) with phi = beta sin(2 pi x1) sin(2 pi x2); 2D only.
struct MongeAmpereSpec {
  double beta;
};

struct CustomSpec {
  std::vector<double> values;
};

using DensityShape = std::variant<GaussianSpec, GaussianMixtureSpec, LaplaceSpec, UniformSpec, PolynomialSpec,
                                  MongeAmpereSpec, CustomSpec>;

struct DensitySpec {
  DensityShape shape;
  double shift = 0.0;
};

/// Evaluate the formula at the nodes, add the shift, normalize to unit mass.
DensityField realize(const DensitySpec& spec, const LatticeGrid& grid);

/// Rescale nonnegative node values to unit mass.
DensityField normalized(const LatticeGrid& grid, Vec values);

/// Exact initial velocity of the periodic Monge-Ampere test problem, one row
/// per node, one column per axis.
Eigen::MatrixXd exact_initial_velocity_ex1(const LatticeGrid& grid, double beta);

/// (1 - t) mu + t nu.
DensityField linear_blend(const DensityField& mu, const DensityField& nu, double t);

/// Full field from its first N-1 entries; the last node absorbs the mass
/// balance and may come out negative.
DensityField mass_closure(const Vec& interior, const LatticeGrid& grid);

/// First N-1 entries.
Vec truncate(const DensityField& rho);

}  // namespace otg
