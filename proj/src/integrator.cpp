#include "otg/integrator.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lapack.hpp"
#include "otg/errors.hpp"

namespace otg {

void IntegratorConfig::validate() const {
  if (steps < 1) throw ConfigError("integrator steps must be >= 1");
  if (!(blowup_threshold > 1.0)) throw ConfigError("blowup threshold must be > 1");
}

// Solves (I - dt L(S)) x = rho, by Jacobi sweeps when the matrix is
// strongly diagonally dominant, else directly. L(S) has one 2x2 stencil per edge:
// with g = (S_a - S_b) / (2 dx^2), L_aa += g, L_ab += g, L_bb -= g, L_ba -= g.
struct Propagator::Solver {
  enum class Kind { Tridiagonal, Banded, Sparse };

  Kind kind;
  int n = 0;
  int band = 0;
  std::vector<double> dl, d, du, ab;
  std::vector<int> ipiv;
  Eigen::SparseMatrix<double> A;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  // valuePtr offsets of (aa, ab, ba, bb) per edge and of each diagonal
  std::vector<std::array<Eigen::Index, 4>> slots;
  std::vector<Eigen::Index> diag_slot;
  std::vector<double> g;
  Vec diag, off, x, y;

  explicit Solver(const SpanningPath& path) {
    const auto& grid = path.grid();
    n = static_cast<int>(grid.node_count());
    if (grid.boundary() == Boundary::NoFlux && grid.dim() == 1) {
      kind = Kind::Tridiagonal;
      dl.resize(static_cast<std::size_t>(n));
      d.resize(static_cast<std::size_t>(n));
      du.resize(static_cast<std::size_t>(n));
    } else if (grid.boundary() == Boundary::NoFlux) {
      kind = Kind::Banded;
      band = static_cast<int>(grid.stride(0));
      ab.resize(static_cast<std::size_t>(3 * band + 1) * static_cast<std::size_t>(n));
      ipiv.resize(static_cast<std::size_t>(n));
    } else {
      kind = Kind::Sparse;
      std::vector<Eigen::Triplet<double>> trip;
      for (int i = 0; i < n; ++i) trip.emplace_back(i, i, 1.0);
      for (const auto& e : path.edges()) {
        const auto a = static_cast<int>(e.tail);
        const auto b = static_cast<int>(e.head);
        trip.emplace_back(a, b, 1.0);
        trip.emplace_back(b, a, 1.0);
      }
      A.resize(n, n);
      A.setFromTriplets(trip.begin(), trip.end());
      A.makeCompressed();
      auto offset = [&](int r, int c) { return static_cast<Eigen::Index>(&A.coeffRef(r, c) - A.valuePtr()); };
      for (int i = 0; i < n; ++i) diag_slot.push_back(offset(i, i));
      for (const auto& e : path.edges()) {
        const auto a = static_cast<int>(e.tail);
        const auto b = static_cast<int>(e.head);
        slots.push_back({offset(a, a), offset(a, b), offset(b, a), offset(b, b)});
      }
      lu.analyzePattern(A);
    }
  }

  // Jacobi sweeps when I - dt L(S) is strictly row diagonally dominant with
  // ratio q < 1/2; they stop once the a-posteriori bound q/(1-q) |dx| drops to
  // roundoff. Returns false (rho untouched) when the matrix is not dominant
  // enough or the sweeps do not settle.
  bool jacobi(const std::vector<Edge>& edges, const Vec& S, double c, Vec& rho) {
    const auto N = static_cast<Eigen::Index>(n);
    g.resize(edges.size());
    diag.setOnes(N);
    off.setZero(N);
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const auto a = static_cast<Eigen::Index>(edges[k].tail);
      const auto b = static_cast<Eigen::Index>(edges[k].head);
      g[k] = c * (S[a] - S[b]);
      diag[a] -= g[k];
      diag[b] += g[k];
      off[a] += std::abs(g[k]);
      off[b] += std::abs(g[k]);
    }
    const double q = (off.array() / diag.array().abs()).maxCoeff();
    if (!(q < 0.5)) return false;
    x = rho.cwiseQuotient(diag);
    const double bound = q / (1.0 - q);
    for (int sweep = 0; sweep < 200; ++sweep) {
      y = rho;
      for (std::size_t k = 0; k < edges.size(); ++k) {
        const auto a = static_cast<Eigen::Index>(edges[k].tail);
        const auto b = static_cast<Eigen::Index>(edges[k].head);
        y[a] += g[k] * x[b];
        y[b] -= g[k] * x[a];
      }
      y.array() /= diag.array();
      const double change = (y - x).lpNorm<Eigen::Infinity>();
      x.swap(y);
      if (bound * change <= 1e-16 * x.lpNorm<Eigen::Infinity>()) {
        rho = x;
        return true;
      }
    }
    return false;
  }

  void solve(const SpanningPath& path, const Vec& S, double dt, Vec& rho) {
    const double dx = path.grid().spacing();
    const double c = dt / (2.0 * dx * dx);
    const auto& edges = path.edges();
    if (kind != Kind::Tridiagonal && jacobi(edges, S, c, rho)) return;
    switch (kind) {
      case Kind::Tridiagonal: {
        std::fill(d.begin(), d.end(), 1.0);
        for (const auto& e : edges) {
          const auto a = e.tail;  // head = a + 1
          const double g = c * (S[static_cast<Eigen::Index>(a)] - S[static_cast<Eigen::Index>(a + 1)]);
          d[a] -= g;
          du[a] = -g;
          dl[a] = g;
          d[a + 1] += g;
        }
        const int nrhs = 1;
        int info = 0;
        dgtsv_(&n, &nrhs, dl.data(), d.data(), du.data(), rho.data(), &n, &info);
        if (info != 0) throw LinearSolveSingular("implicit density step: tridiagonal solve failed, info=" + std::to_string(info));
        return;
      }
      case Kind::Banded: {
        const int ldab = 3 * band + 1;
        std::fill(ab.begin(), ab.end(), 0.0);
        // A(i, j) lives at ab[(2 band + i - j) + j ldab]
        auto at = [&](std::size_t i, std::size_t j) -> double& {
          return ab[static_cast<std::size_t>(2 * band) + i - j + j * static_cast<std::size_t>(ldab)];
        };
        for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) at(i, i) = 1.0;
        for (const auto& e : edges) {
          const double g = c * (S[static_cast<Eigen::Index>(e.tail)] - S[static_cast<Eigen::Index>(e.head)]);
          at(e.tail, e.tail) -= g;
          at(e.tail, e.head) -= g;
          at(e.head, e.tail) += g;
          at(e.head, e.head) += g;
        }
        const int nrhs = 1;
        int info = 0;
        dgbsv_(&n, &band, &band, &nrhs, ab.data(), &ldab, ipiv.data(), rho.data(), &n, &info);
        if (info != 0) throw LinearSolveSingular("implicit density step: banded solve failed, info=" + std::to_string(info));
        return;
      }
      case Kind::Sparse: {
        double* v = A.valuePtr();
        std::fill(v, v + A.nonZeros(), 0.0);
        for (auto s : diag_slot) v[s] = 1.0;
        for (std::size_t k = 0; k < edges.size(); ++k) {
          const double g = c * (S[static_cast<Eigen::Index>(edges[k].tail)] - S[static_cast<Eigen::Index>(edges[k].head)]);
          v[slots[k][0]] -= g;
          v[slots[k][1]] -= g;
          v[slots[k][2]] += g;
          v[slots[k][3]] += g;
        }
        lu.factorize(A);
        if (lu.info() != Eigen::Success) throw LinearSolveSingular("implicit density step: sparse LU failed");
        rho = lu.solve(rho).eval();
        return;
      }
    }
  }
};

Propagator::Propagator(const SpanningPath& path, const IntegratorConfig& cfg)
    : path_(&path), cfg_(cfg), solver_(std::make_unique<Solver>(path)) {
  cfg_.validate();
}

Propagator::Propagator(const Propagator& other)
    : path_(other.path_), cfg_(other.cfg_), solver_(std::make_unique<Solver>(*other.path_)) {}

Propagator::~Propagator() = default;

void Propagator::symplectic_step(Vec& rho, Vec& S, double dt) {
  solver_->solve(*path_, S, dt, rho);
  potential_rate(path_->grid(), path_->edges(), S, tmp_s_);
  S += dt * tmp_s_;
}

void Propagator::rk4_step(Vec& rho, Vec& S, double dt) {
  const auto& grid = path_->grid();
  const auto& edges = path_->edges();
  density_rate(grid, edges, rho, S, k1r_);
  potential_rate(grid, edges, S, k1s_);
  tmp_r_ = rho + 0.5 * dt * k1r_;
  tmp_s_ = S + 0.5 * dt * k1s_;
  density_rate(grid, edges, tmp_r_, tmp_s_, k2r_);
  potential_rate(grid, edges, tmp_s_, k2s_);
  tmp_r_ = rho + 0.5 * dt * k2r_;
  tmp_s_ = S + 0.5 * dt * k2s_;
  density_rate(grid, edges, tmp_r_, tmp_s_, k3r_);
  potential_rate(grid, edges, tmp_s_, k3s_);
  tmp_r_ = rho + dt * k3r_;
  tmp_s_ = S + dt * k3s_;
  density_rate(grid, edges, tmp_r_, tmp_s_, k4r_);
  potential_rate(grid, edges, tmp_s_, k4s_);
  rho += (dt / 6.0) * (k1r_ + 2.0 * k2r_ + 2.0 * k3r_ + k4r_);
  S += (dt / 6.0) * (k1s_ + 2.0 * k2s_ + 2.0 * k3s_ + k4s_);
}

void Propagator::step(Vec& rho, Vec& S, double dt) {
  if (cfg_.scheme == Scheme::SymplecticEuler) {
    symplectic_step(rho, S, dt);
  } else {
    rk4_step(rho, S, dt);
  }
}

void Propagator::advance(Vec& rho, Vec& S, double t0, double t1, TrajectoryDiagnostics* diag,
                         const StepObserver* observer) {
  if (!(t1 > t0)) throw ConfigError("integration interval must have t1 > t0");
  const double dt = (t1 - t0) / cfg_.steps;
  const DensityField start{path_->grid(), rho};
  double h0 = 0.0;
  if (diag) {
    h0 = hamiltonian(start, S);
    diag->min_density = rho.minCoeff();
  }
  for (int k = 1; k <= cfg_.steps; ++k) {
    step(rho, S, dt);
    const double t = t0 + k * dt;
    const double big = std::max(rho.lpNorm<Eigen::Infinity>(), S.lpNorm<Eigen::Infinity>());
    if (!std::isfinite(big) || big > cfg_.blowup_threshold) {
      throw TrajectoryBlowUp(t, "trajectory blew up at t=" + std::to_string(t));
    }
    if (diag) diag->min_density = std::min(diag->min_density, rho.minCoeff());
    if (observer) (*observer)(t, rho);
  }
  if (diag) {
    const double w = path_->grid().cell_volume();
    diag->mass_drift = std::abs(rho.sum() - start.values.sum()) * w;
    const double h1 = hamiltonian(DensityField{path_->grid(), rho}, S);
    diag->energy_drift = std::abs(h1 - h0) / std::max(h0, 1e-300);
  }
}

SubintervalResult Propagator::integrate(const PhaseState& state0, double t0, double t1, const StepObserver* observer) {
  if (!(state0.rho.grid == path_->grid())) throw GridMismatch("integrate: state lives on a different grid");
  if (!state0.rho.values.allFinite() || !state0.vhat.values.allFinite()) {
    throw NonFiniteState("integrate: non-finite initial state");
  }
  Vec rho = state0.rho.values;
  Vec S = reconstruct_potential(*path_, state0.vhat, 0.0);
  SubintervalResult out{PhaseState{state0.rho, state0.vhat, t1}, {}};
  advance(rho, S, t0, t1, &out.diag, observer);
  out.endpoint.rho.values = std::move(rho);
  out.endpoint.vhat = restrict_potential(*path_, S);
  return out;
}

PhaseState step(const SpanningPath& path, const PhaseState& state, double dt, Scheme scheme) {
  if (!(dt > 0.0)) throw ConfigError("step size must be > 0");
  IntegratorConfig cfg;
  cfg.scheme = scheme;
  cfg.steps = 1;
  cfg.blowup_threshold = std::numeric_limits<double>::max();
  Propagator prop(path, cfg);
  if (!state.rho.values.allFinite() || !state.vhat.values.allFinite()) throw NonFiniteState("step: non-finite state");
  Vec rho = state.rho.values;
  Vec S = reconstruct_potential(path, state.vhat, 0.0);
  prop.step(rho, S, dt);
  if (!rho.allFinite() || !S.allFinite()) throw NonFiniteState("step: non-finite result");
  return PhaseState{DensityField{state.rho.grid, std::move(rho)}, restrict_potential(path, S), state.time + dt};
}

SubintervalResult integrate_subinterval(const SpanningPath& path, const PhaseState& state0, double t0, double t1,
                                        const IntegratorConfig& cfg) {
  Propagator prop(path, cfg);
  return prop.integrate(state0, t0, t1);
}

}  // namespace otg
