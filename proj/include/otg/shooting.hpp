#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "otg/integrator.hpp"

namespace otg {

/// Block layout of the Newton unknown Z = (v^0, rho^1, v^1, ..., rho^{K-1}, v^{K-1}).
/// Every block has m = N - 1 entries; rho blocks hold the first N - 1 node
/// values, the last node follows from mass_closure.
struct ShootingLayout {
  int K = 1;
  std::size_t m = 0;

  std::size_t blocks() const { return static_cast<std::size_t>(2 * K - 1); }
  std::size_t size() const { return blocks() * m; }
  std::size_t v_offset(int k) const { return static_cast<std::size_t>(2 * k) * m; }
  std::size_t rho_offset(int k) const { return static_cast<std::size_t>(2 * k - 1) * m; }  // k >= 1
  double breakpoint(int k) const { return static_cast<double>(k) / K; }
};

struct ShootingState {
  ShootingLayout layout;
  Vec Z;
};

struct ShootingConfig {
  int max_iters = 30;
  double rel_stop = 1e-5;
  double abs_stop = 1e-9;
  double fd_rel = 1e-6;
  double fd_floor = 1e-8;
  std::optional<double> barrier;
  bool frozen_jacobian = false;
  double success_tol = 1e-5;
  int threads = 0;  // 0: OTG_THREADS, else hardware concurrency

  void validate() const;
};

/// Jacobian of the shooting residual, stored by blocks. G[k] is the dense
/// derivative of subinterval k's endpoint (rho interior, then v unless k is
/// the last subinterval) with respect to its start (rho^k interior unless
/// k == 0, then v^k). The -I continuity blocks are implicit and exact.
struct BlockJacobian {
  ShootingLayout layout;
  std::vector<Eigen::MatrixXd> G;

  int lower_bandwidth() const;
  int upper_bandwidth() const;
  Eigen::MatrixXd to_dense() const;
  // Structural nonzero pattern of the assembled matrix.
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> pattern() const;
  double norm_inf() const;
};

/// LU with partial pivoting in LAPACK band storage. K = 1 has no band
/// structure; that case is factored densely, in place when given an rvalue.
class BandLU {
 public:
  BandLU();
  explicit BandLU(const BlockJacobian& A) : BandLU() { factor(A); }
  BandLU(BandLU&&) noexcept;
  BandLU& operator=(BandLU&&) noexcept;
  ~BandLU();
  void factor(const BlockJacobian& A);
  void factor(BlockJacobian&& A);
  Vec solve(const Vec& rhs) const;
  double rcond() const { return rcond_; }
  bool factored() const { return n_ > 0; }

 private:
  struct Dense;
  void factor_dense(Eigen::MatrixXd&& A, double anorm_inf);

  int n_ = 0, kl_ = 0, ku_ = 0, ldab_ = 0;
  bool dense_ = false;
  std::vector<double> ab_;
  std::unique_ptr<Dense> dense_lu_;
  std::vector<int> ipiv_;
  double rcond_ = 0.0;
};

/// Solve A x = rhs by banded LU. Throws JacobianSingular when a pivot falls
/// below 1e-13 ||A||_inf.
Vec solve_linear(const BlockJacobian& A, const Vec& rhs);

struct NewtonRecord {
  int iteration = 0;
  double norm2 = 0.0;
  double norm_inf = 0.0;
  double step_norm = 0.0;
  int barrier_hits = 0;
  double rcond = 0.0;  // of the Jacobian used for this step, 0 at iteration 0
};

struct NewtonResult {
  ShootingState state;
  Vec F;
  std::vector<NewtonRecord> log;
  int iterations = 0;
  bool success = false;
  std::string stop_reason;
};

/**
 * The multiple-shooting system for one (mu, target) pair. mu and target
 * share the path's grid.
 */
class ShootingProblem {
 public:
  ShootingProblem(const SpanningPath& path, DensityField mu, DensityField target, int K, IntegratorConfig cfg);

  const ShootingLayout& layout() const { return layout_; }
  const SpanningPath& path() const { return *path_; }
  const DensityField& mu() const { return mu_; }
  const DensityField& target() const { return target_; }
  const IntegratorConfig& integrator() const { return cfg_; }
  void set_target(DensityField target);

  // Start of subinterval k: (rho^k full, v^k).
  PhaseState start(const Vec& Z, int k) const;

  Vec residual(const Vec& Z) const;

  // Forward-difference Jacobian. `threads` <= 0 picks OTG_THREADS or the
  // hardware concurrency.
  BlockJacobian jacobian_fd(const Vec& Z, const ShootingConfig& cfg) const;

  NewtonResult newton(const Vec& Z0, const ShootingConfig& cfg) const;

  // Full breakpoint densities rho^0 = mu, rho^1, ..., rho^{K-1}, then the
  // endpoint of the last subinterval.
  std::vector<DensityField> breakpoint_densities(const Vec& Z) const;

 private:
  // Inputs of subinterval k: (rho^k interior unless k == 0, v^k).
  Vec local_start(const Vec& Z, int k) const;
  // Endpoint (rho interior, then v unless k == K-1) from the local inputs.
  Vec endpoint_from_local(Propagator& prop, int k, const Vec& local) const;

  const SpanningPath* path_;
  DensityField mu_;
  DensityField target_;
  IntegratorConfig cfg_;
  ShootingLayout layout_;
};

Vec residual(const SpanningPath& path, const ShootingState& Z, const DensityField& mu, const DensityField& nu,
             const IntegratorConfig& cfg);

BlockJacobian jacobian_fd(const SpanningPath& path, const ShootingState& Z, const DensityField& mu,
                          const DensityField& nu, const IntegratorConfig& cfg, const ShootingConfig& shoot = {});

NewtonResult newton_solve(const SpanningPath& path, const ShootingState& Z0, const DensityField& mu,
                          const DensityField& nu, const IntegratorConfig& cfg_int, const ShootingConfig& cfg_shoot);

/// Thread count from OTG_THREADS (0 or unset: hardware concurrency).
int worker_threads(int requested = 0);

}  // namespace otg
