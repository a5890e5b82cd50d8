#include "otg/density.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "otg/errors.hpp"

namespace otg {
namespace {

void require_axes(const std::vector<double>& params, const LatticeGrid& grid, const char* what) {
  if (params.size() != static_cast<std::size_t>(grid.dim())) {
    throw DimensionMismatch(std::string(what) + " needs one parameter per axis (" + std::to_string(grid.dim()) +
                            "), got " + std::to_string(params.size()));
  }
}

void require_positive(const std::vector<double>& rates, const char* what) {
  for (double r : rates) {
    if (!(r > 0.0) || !std::isfinite(r)) throw NonFiniteValue(std::string(what) + " rates must be finite and > 0");
  }
}

double gaussian(const std::vector<double>& rates, const std::vector<double>& centers, std::span<const double> x) {
  double e = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) e += rates[k] * (x[k] - centers[k]) * (x[k] - centers[k]);
  return std::exp(-e);
}

struct Evaluator {
  const LatticeGrid& grid;
  std::span<const double> x;
  std::size_t node;

  double operator()(const GaussianSpec& g) const { return gaussian(g.rates, g.centers, x); }
  double operator()(const GaussianMixtureSpec& m) const {
    double s = 0.0;
    for (const auto& b : m.bumps) s += b.weight * gaussian(b.rates, b.centers, x);
    return s;
  }
  double operator()(const LaplaceSpec& l) const {
    double e = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) e += l.rates[k] * std::abs(x[k] - l.centers[k]);
    return std::exp(-e);
  }
  double operator()(const UniformSpec&) const { return 1.0; }
  double operator()(const PolynomialSpec& p) const {
    double s = 0.0;
    for (double xk : x) s += (xk - p.root_lo) * (xk - p.root_lo) * (xk - p.root_hi) * (xk - p.root_hi);
    return s;
  }
  double operator()(const MongeAmpereSpec& m) const {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double s1 = std::sin(two_pi * x[0]), c1 = std::cos(two_pi * x[0]);
    const double s2 = std::sin(two_pi * x[1]), c2 = std::cos(two_pi * x[1]);
    const double k = two_pi * two_pi * m.beta;
    // D^2 phi = k [[-s1 s2, c1 c2], [c1 c2, -s1 s2]]
    const double diag = 1.0 + k * s1 * s2;
    const double off = k * c1 * c2;
    return diag * diag - off * off;
  }
  double operator()(const CustomSpec& c) const { return c.values[node]; }
};

void validate(const DensitySpec& spec, const LatticeGrid& grid) {
  if (!std::isfinite(spec.shift) || spec.shift < 0.0) throw NonFiniteValue("density shift must be finite and >= 0");
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSpec> || std::is_same_v<T, LaplaceSpec>) {
          require_axes(s.rates, grid, "density");
          require_axes(s.centers, grid, "density");
          require_positive(s.rates, "density");
        } else if constexpr (std::is_same_v<T, GaussianMixtureSpec>) {
          if (s.bumps.empty()) throw DimensionMismatch("gaussian mixture needs at least one bump");
          for (const auto& b : s.bumps) {
            require_axes(b.rates, grid, "bump");
            require_axes(b.centers, grid, "bump");
            require_positive(b.rates, "bump");
            if (!(b.weight > 0.0)) throw NonFiniteValue("bump weights must be > 0");
          }
        } else if constexpr (std::is_same_v<T, MongeAmpereSpec>) {
          if (grid.dim() != 2) throw DimensionMismatch("Monge-Ampere test density is two-dimensional");
          if (!std::isfinite(s.beta)) throw NonFiniteValue("beta must be finite");
        } else if constexpr (std::is_same_v<T, CustomSpec>) {
          if (s.values.size() != grid.node_count()) throw DimensionMismatch("custom density needs one value per node");
        }
      },
      spec.shape);
}

}  // namespace

bool DensityField::is_valid(double tol) const {
  if (tol < 0.0) tol = 1e-12 * static_cast<double>(values.size());
  if (!values.allFinite()) return false;
  if (values.minCoeff() < 0.0) return false;
  return std::abs(mass() - 1.0) <= tol;
}

DensityField normalized(const LatticeGrid& grid, Vec values) {
  if (static_cast<std::size_t>(values.size()) != grid.node_count()) {
    throw DimensionMismatch("density needs one value per node");
  }
  if (!values.allFinite()) throw NonFiniteValue("density values must be finite");
  if (values.minCoeff() < 0.0) throw InvalidDensity("density values must be nonnegative");
  const double total = values.sum() * grid.cell_volume();
  if (!(total > 0.0)) throw InvalidDensity("density has zero mass");
  values /= total;
  return DensityField{grid, std::move(values)};
}

DensityField realize(const DensitySpec& spec, const LatticeGrid& grid) {
  validate(spec, grid);
  const std::size_t N = grid.node_count();
  Vec values(static_cast<Eigen::Index>(N));
  std::vector<double> x(static_cast<std::size_t>(grid.dim()));
  for (std::size_t f = 0; f < N; ++f) {
    const auto idx = grid.multi(f);
    for (int a = 0; a < grid.dim(); ++a) x[static_cast<std::size_t>(a)] = grid.lower() + grid.spacing() * idx[static_cast<std::size_t>(a)];
    values[static_cast<Eigen::Index>(f)] = std::visit(Evaluator{grid, x, f}, spec.shape) + spec.shift;
  }
  return normalized(grid, std::move(values));
}

Eigen::MatrixXd exact_initial_velocity_ex1(const LatticeGrid& grid, double beta) {
  if (grid.dim() != 2) throw DimensionMismatch("the Monge-Ampere test velocity is two-dimensional");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Eigen::MatrixXd v(static_cast<Eigen::Index>(grid.node_count()), 2);
  for (std::size_t f = 0; f < grid.node_count(); ++f) {
    const double x1 = grid.coordinate(f, 0);
    const double x2 = grid.coordinate(f, 1);
    const auto r = static_cast<Eigen::Index>(f);
    v(r, 0) = two_pi * beta * std::cos(two_pi * x1) * std::sin(two_pi * x2);
    v(r, 1) = two_pi * beta * std::sin(two_pi * x1) * std::cos(two_pi * x2);
  }
  return v;
}

DensityField linear_blend(const DensityField& mu, const DensityField& nu, double t) {
  if (!(mu.grid == nu.grid)) throw GridMismatch("linear_blend: densities live on different grids");
  if (t == 0.0) return mu;
  if (t == 1.0) return nu;
  return DensityField{mu.grid, (1.0 - t) * mu.values + t * nu.values};
}

DensityField mass_closure(const Vec& interior, const LatticeGrid& grid) {
  const auto N = static_cast<Eigen::Index>(grid.node_count());
  if (interior.size() != N - 1) throw DimensionMismatch("mass_closure expects N-1 interior values");
  Vec values(N);
  values.head(N - 1) = interior;
  const double w = grid.cell_volume();
  values[N - 1] = (1.0 - w * interior.sum()) / w;
  return DensityField{grid, std::move(values)};
}

Vec truncate(const DensityField& rho) { return rho.values.head(rho.values.size() - 1); }

}  // namespace otg
