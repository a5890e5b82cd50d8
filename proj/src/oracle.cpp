#include "otg/oracle.hpp"

#include <cmath>

#include "otg/errors.hpp"

namespace otg::oracle {

namespace {

void check_grid(const LatticeGrid& grid) {
  if (grid.node_count() > kMaxNodes) throw OracleCapExceeded("oracle limited to " + std::to_string(kMaxNodes) + " nodes");
}

// S on every node from vhat by repeated sweeps over the generators.
Vec potential_by_sweeps(const SpanningPath& path, const Vec& vhat) {
  const auto N = path.grid().node_count();
  Vec S = Vec::Zero(static_cast<Eigen::Index>(N));
  std::vector<bool> known(N, false);
  known[0] = true;
  std::size_t count = 1;
  while (count < N) {
    const std::size_t before = count;
    for (std::size_t w = 0; w < path.generators().size(); ++w) {
      const auto& g = path.generators()[w];
      if (known[g.tail] && !known[g.head]) {
        S[static_cast<Eigen::Index>(g.head)] = S[static_cast<Eigen::Index>(g.tail)] + vhat[static_cast<Eigen::Index>(w)];
        known[g.head] = true;
        ++count;
      }
    }
    if (count == before) throw DimensionMismatch("generators do not span the lattice");
  }
  return S;
}

void flow(const LatticeGrid& grid, const Vec& rho, const Vec& S, Vec& drho, Vec& dS) {
  const auto N = grid.node_count();
  const double dx2 = grid.spacing() * grid.spacing();
  drho = Vec::Zero(static_cast<Eigen::Index>(N));
  dS = Vec::Zero(static_cast<Eigen::Index>(N));
  for (std::size_t i = 0; i < N; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (const auto& nb : neighbors(grid, grid.multi(i))) {
      const auto j = static_cast<Eigen::Index>(grid.flat(nb));
      const double th = (rho[ii] + rho[j]) / 2.0;
      drho[ii] += (S[ii] - S[j]) * th / dx2;
      dS[ii] -= 0.25 * (S[ii] - S[j]) * (S[ii] - S[j]) / dx2;
    }
  }
}

Vec restrict_to_generators(const SpanningPath& path, const Vec& S) {
  Vec v(static_cast<Eigen::Index>(path.generators().size()));
  for (std::size_t w = 0; w < path.generators().size(); ++w) {
    const auto& g = path.generators()[w];
    v[static_cast<Eigen::Index>(w)] = S[static_cast<Eigen::Index>(g.head)] - S[static_cast<Eigen::Index>(g.tail)];
  }
  return v;
}

std::pair<int, double> sign_logdet(const Eigen::MatrixXd& M) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  const Eigen::MatrixXd& U = lu.matrixLU();
  int sign = static_cast<int>(lu.permutationP().determinant());
  double log = 0.0;
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    const double u = U(i, i);
    if (u < 0) sign = -sign;
    log += std::log(std::abs(u));
  }
  return {sign, log};
}

bool numerically_singular(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& s = svd.singularValues();
  return !(s(s.size() - 1) > 1e-13 * s(0));
}

}  // namespace

OracleReport compare(const std::string& quantity, const Eigen::VectorXd& oracle, const Eigen::VectorXd& production) {
  OracleReport r;
  r.quantity = quantity;
  r.oracle = oracle.lpNorm<Eigen::Infinity>();
  r.production = production.lpNorm<Eigen::Infinity>();
  r.abs_dev = (oracle - production).lpNorm<Eigen::Infinity>();
  r.rel_dev = r.abs_dev / std::max(r.oracle, 1e-300);
  return r;
}

ReferenceDerivative rhs_reference(const SpanningPath& path, const DensityField& rho, const ReducedVelocity& vhat) {
  check_grid(path.grid());
  const Vec S = potential_by_sweeps(path, vhat.values);
  Vec dS;
  ReferenceDerivative d;
  flow(path.grid(), rho.values, S, d.drho, dS);
  d.dvhat = restrict_to_generators(path, dS);
  return d;
}

ReferenceState integrate_reference(const SpanningPath& path, const DensityField& rho, const ReducedVelocity& vhat,
                                   double t0, double t1, int production_steps) {
  check_grid(path.grid());
  const auto& grid = path.grid();
  const int steps = 100 * production_steps;
  const double dt = (t1 - t0) / steps;
  Vec r = rho.values;
  Vec S = potential_by_sweeps(path, vhat.values);
  Vec a1, b1, a2, b2, a3, b3, a4, b4;
  for (int k = 0; k < steps; ++k) {
    flow(grid, r, S, a1, b1);
    flow(grid, r + 0.5 * dt * a1, S + 0.5 * dt * b1, a2, b2);
    flow(grid, r + 0.5 * dt * a2, S + 0.5 * dt * b2, a3, b3);
    flow(grid, r + dt * a3, S + dt * b3, a4, b4);
    r += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    S += dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    if (!r.allFinite() || !S.allFinite()) throw TrajectoryBlowUp(t0 + (k + 1) * dt, "reference trajectory blew up");
  }
  return {r, restrict_to_generators(path, S)};
}

Eigen::MatrixXd jacobian_reference(const std::function<Vec(const Vec&)>& F, const Vec& Z, std::size_t nodes, int K,
                                   double h) {
  if (nodes > kMaxNodes || K > kMaxSubintervals) throw OracleCapExceeded("oracle Jacobian limited to N<=81, K<=4");
  const Vec F0 = F(Z);
  Eigen::MatrixXd J(F0.size(), Z.size());
  Vec Zp = Z;
  for (Eigen::Index j = 0; j < Z.size(); ++j) {
    Zp[j] = Z[j] + h;
    const Vec fp = F(Zp);
    Zp[j] = Z[j] - h;
    const Vec fm = F(Zp);
    Zp[j] = Z[j];
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

BlockEliminationCheck block_elimination(const Eigen::MatrixXd& A, std::size_t m, int K) {
  if (K < 2) throw DimensionMismatch("block elimination needs K >= 2");
  if (K > kMaxSubintervals || m + 1 > kMaxNodes) throw OracleCapExceeded("oracle limited to N<=81, K<=4");
  const auto n = A.rows();
  const auto mm = static_cast<Eigen::Index>(m);
  if (A.cols() != n || n != static_cast<Eigen::Index>((2 * K - 1) * static_cast<int>(m))) {
    throw DimensionMismatch("block elimination: matrix does not match the layout");
  }
  const Eigen::MatrixXd A11 = A.topLeftCorner(n - mm, mm);
  const Eigen::MatrixXd A12 = A.topRightCorner(n - mm, n - mm);
  const Eigen::MatrixXd A22 = A.bottomRightCorner(mm, n - mm);
  const Eigen::MatrixXd M = A22 * A12.partialPivLu().solve(A11);

  BlockEliminationCheck c;
  c.assembled_singular = numerically_singular(A);
  c.product_singular = numerically_singular(M);
  auto [sa, la] = sign_logdet(A);
  auto [sm, lm] = sign_logdet(M);
  c.sign_assembled = sa;
  c.sign_product = (m % 2 == 0) ? sm : -sm;
  c.log_det_assembled = la;
  c.log_det_product = lm;
  c.consistent = c.assembled_singular == c.product_singular;
  if (c.consistent && !c.assembled_singular) {
    c.consistent = c.sign_assembled == c.sign_product && std::abs(la - lm) <= 1e-8 * std::max(1.0, std::abs(la));
  }
  return c;
}

double analytic_w2_gaussian_1d(double b0, double b1, double sigma0, double sigma1) {
  if (!(sigma0 > 0.0) || !(sigma1 > 0.0)) throw NonFiniteValue("standard deviations must be > 0");
  return std::sqrt((b0 - b1) * (b0 - b1) + (sigma0 - sigma1) * (sigma0 - sigma1));
}

}  // namespace otg::oracle
