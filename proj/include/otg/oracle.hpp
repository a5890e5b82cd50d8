#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

#include "otg/density.hpp"
#include "otg/grid.hpp"

// Brute-force references for tests. Nothing here calls into the solver
// libraries; the only shared code is grid and density.
namespace otg::oracle {

constexpr std::size_t kMaxNodes = 81;
constexpr int kMaxSubintervals = 4;

struct OracleReport {
  std::string quantity;
  double oracle = 0.0;
  double production = 0.0;
  double abs_dev = 0.0;
  double rel_dev = 0.0;
};

OracleReport compare(const std::string& quantity, const Eigen::VectorXd& oracle, const Eigen::VectorXd& production);

struct ReferenceDerivative {
  Vec drho;
  Vec dvhat;
};

/// Node-by-node evaluation of the (rho, S) flow mapped to (rho, vhat).
ReferenceDerivative rhs_reference(const SpanningPath& path, const DensityField& rho, const ReducedVelocity& vhat);

struct ReferenceState {
  Vec rho;
  Vec vhat;
};

/// Classical RK4 with 100 * production_steps steps over [t0, t1].
ReferenceState integrate_reference(const SpanningPath& path, const DensityField& rho, const ReducedVelocity& vhat,
                                   double t0, double t1, int production_steps);

/// Dense central-difference Jacobian of F at Z with step h.
Eigen::MatrixXd jacobian_reference(const std::function<Vec(const Vec&)>& F, const Vec& Z, std::size_t nodes, int K,
                                   double h = 1e-5);

struct BlockEliminationCheck {
  bool assembled_singular = false;
  bool product_singular = false;
  int sign_assembled = 0;
  int sign_product = 0;  // sign of (-1)^m det(A22 A12^{-1} A11)
  double log_det_assembled = 0.0;
  double log_det_product = 0.0;
  bool consistent = false;
};

/// For K >= 2: split rows into (all but the last m, last m) and columns into
/// (first m, rest). With A21 = 0, det A = (-1)^m det(A22 A12^{-1} A11).
BlockEliminationCheck block_elimination(const Eigen::MatrixXd& A, std::size_t m, int K);

/// W2 between N(b0, sigma0^2) and N(b1, sigma1^2) on the line.
double analytic_w2_gaussian_1d(double b0, double b1, double sigma0, double sigma1);

}  // namespace otg::oracle
