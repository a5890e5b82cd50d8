#include "otg/shooting.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "lapack.hpp"
#include "otg/errors.hpp"

namespace otg {

namespace {

// Runs body(worker, i) for i in [0, count) on `threads` workers; the first
// exception is rethrown after every worker has stopped.
template <class Body>
void parallel_for(std::size_t count, int threads, Body&& body) {
  const auto workers = static_cast<std::size_t>(std::max(1, std::min<int>(threads, static_cast<int>(count))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(std::size_t{0}, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          body(w, i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::size_t rows_of(const ShootingLayout& L, int k) { return k < L.K - 1 ? 2 * L.m : L.m; }
std::size_t cols_of(const ShootingLayout& L, int k) { return k >= 1 ? 2 * L.m : L.m; }
std::size_t row0_of(const ShootingLayout& L, int k) { return static_cast<std::size_t>(2 * k) * L.m; }
std::size_t col0_of(const ShootingLayout& L, int k) { return k >= 1 ? L.rho_offset(k) : 0; }

}  // namespace

int worker_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("OTG_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void ShootingConfig::validate() const {
  if (max_iters < 1) throw ConfigError("newton max_iters must be >= 1");
  if (!(rel_stop > 0.0) || !(abs_stop > 0.0) || !(fd_rel > 0.0) || !(fd_floor > 0.0) || !(success_tol > 0.0)) {
    throw ConfigError("shooting tolerances must be > 0");
  }
  if (barrier && !(*barrier >= 0.0)) throw ConfigError("barrier must be >= 0");
}

// ---- BlockJacobian ----

int BlockJacobian::lower_bandwidth() const {
  std::size_t kl = 0;
  for (int k = 0; k < layout.K; ++k) {
    kl = std::max(kl, row0_of(layout, k) + rows_of(layout, k) - 1 - col0_of(layout, k));
  }
  return static_cast<int>(kl);
}

int BlockJacobian::upper_bandwidth() const {
  std::size_t ku = layout.K > 1 ? layout.m : 0;
  for (int k = 0; k < layout.K; ++k) {
    const std::size_t c_end = col0_of(layout, k) + cols_of(layout, k) - 1;
    if (c_end > row0_of(layout, k)) ku = std::max(ku, c_end - row0_of(layout, k));
  }
  return static_cast<int>(ku);
}

Eigen::MatrixXd BlockJacobian::to_dense() const {
  const auto n = static_cast<Eigen::Index>(layout.size());
  const auto m = static_cast<Eigen::Index>(layout.m);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < layout.K; ++k) {
    A.block(static_cast<Eigen::Index>(row0_of(layout, k)), static_cast<Eigen::Index>(col0_of(layout, k)),
            G[static_cast<std::size_t>(k)].rows(), G[static_cast<std::size_t>(k)].cols()) = G[static_cast<std::size_t>(k)];
    if (k < layout.K - 1) {
      const auto r = static_cast<Eigen::Index>(row0_of(layout, k));
      A.block(r, static_cast<Eigen::Index>(layout.rho_offset(k + 1)), m, m) -= Eigen::MatrixXd::Identity(m, m);
      A.block(r + m, static_cast<Eigen::Index>(layout.v_offset(k + 1)), m, m) -= Eigen::MatrixXd::Identity(m, m);
    }
  }
  return A;
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> BlockJacobian::pattern() const {
  const auto n = static_cast<Eigen::Index>(layout.size());
  const auto m = static_cast<Eigen::Index>(layout.m);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> P = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, false);
  for (int k = 0; k < layout.K; ++k) {
    P.block(static_cast<Eigen::Index>(row0_of(layout, k)), static_cast<Eigen::Index>(col0_of(layout, k)),
            static_cast<Eigen::Index>(rows_of(layout, k)), static_cast<Eigen::Index>(cols_of(layout, k)))
        .setConstant(true);
    if (k < layout.K - 1) {
      const auto r = static_cast<Eigen::Index>(row0_of(layout, k));
      for (Eigen::Index i = 0; i < m; ++i) {
        P(r + i, static_cast<Eigen::Index>(layout.rho_offset(k + 1)) + i) = true;
        P(r + m + i, static_cast<Eigen::Index>(layout.v_offset(k + 1)) + i) = true;
      }
    }
  }
  return P;
}

double BlockJacobian::norm_inf() const {
  double best = 0.0;
  for (int k = 0; k < layout.K; ++k) {
    const auto& g = G[static_cast<std::size_t>(k)];
    Vec rows = g.cwiseAbs().rowwise().sum();
    if (k < layout.K - 1) rows.array() += 1.0;
    best = std::max(best, rows.maxCoeff());
  }
  return best;
}

// ---- BandLU ----

// In-place partial-pivot LU; the matrix storage is owned alongside.
struct BandLU::Dense {
  Eigen::MatrixXd A;
  Eigen::PartialPivLU<Eigen::Ref<Eigen::MatrixXd>> lu;
  explicit Dense(Eigen::MatrixXd&& m) : A(std::move(m)), lu(A) {}
};

BandLU::BandLU() = default;
BandLU::BandLU(BandLU&&) noexcept = default;
BandLU& BandLU::operator=(BandLU&&) noexcept = default;
BandLU::~BandLU() = default;

void BandLU::factor_dense(Eigen::MatrixXd&& A, double anorm_inf) {
  n_ = 0;
  dense_ = true;
  dense_lu_ = std::make_unique<Dense>(std::move(A));
  const auto& LU = dense_lu_->lu.matrixLU();
  const double tol = 1e-13 * anorm_inf;
  for (Eigen::Index i = 0; i < LU.rows(); ++i) {
    if (!(std::abs(LU(i, i)) >= tol)) throw JacobianSingular("pivot " + std::to_string(i) + " below 1e-13 ||A||");
  }
  rcond_ = dense_lu_->lu.rcond();
  n_ = static_cast<int>(LU.rows());
}

void BandLU::factor(BlockJacobian&& A) {
  if (A.layout.K == 1) {
    const double anorm = A.norm_inf();
    factor_dense(std::move(A.G[0]), anorm);
    return;
  }
  factor(static_cast<const BlockJacobian&>(A));
}

void BandLU::factor(const BlockJacobian& A) {
  const auto& L = A.layout;
  if (L.K == 1) {
    factor_dense(Eigen::MatrixXd(A.G[0]), A.norm_inf());
    return;
  }
  dense_ = false;
  dense_lu_.reset();
  n_ = static_cast<int>(L.size());
  kl_ = A.lower_bandwidth();
  ku_ = A.upper_bandwidth();
  ldab_ = 2 * kl_ + ku_ + 1;
  ab_.assign(static_cast<std::size_t>(ldab_) * static_cast<std::size_t>(n_), 0.0);
  ipiv_.assign(static_cast<std::size_t>(n_), 0);
  const auto ld = static_cast<std::size_t>(ldab_);
  const auto off = static_cast<std::size_t>(kl_ + ku_);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return ab_[off + i - j + j * ld]; };

  std::vector<double> col_sum(static_cast<std::size_t>(n_), 0.0);
  for (int k = 0; k < L.K; ++k) {
    const auto& g = A.G[static_cast<std::size_t>(k)];
    const std::size_t r0 = row0_of(L, k);
    const std::size_t c0 = col0_of(L, k);
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const double v = g(r, c);
        at(r0 + static_cast<std::size_t>(r), c0 + static_cast<std::size_t>(c)) = v;
        col_sum[c0 + static_cast<std::size_t>(c)] += std::abs(v);
      }
    }
    if (k < L.K - 1) {
      for (std::size_t i = 0; i < L.m; ++i) {
        at(r0 + i, L.rho_offset(k + 1) + i) = -1.0;
        at(r0 + L.m + i, L.v_offset(k + 1) + i) = -1.0;
        col_sum[L.rho_offset(k + 1) + i] += 1.0;
        col_sum[L.v_offset(k + 1) + i] += 1.0;
      }
    }
  }
  const double anorm1 = *std::max_element(col_sum.begin(), col_sum.end());
  const double anorm_inf = A.norm_inf();

  int info = 0;
  dgbtrf_(&n_, &n_, &kl_, &ku_, ab_.data(), &ldab_, ipiv_.data(), &info);
  if (info < 0) throw JacobianSingular("dgbtrf: illegal argument " + std::to_string(-info));
  const double tol = 1e-13 * anorm_inf;
  for (std::size_t i = 0; i < static_cast<std::size_t>(n_); ++i) {
    if (!(std::abs(ab_[off + i * ld]) >= tol)) {
      n_ = 0;
      throw JacobianSingular("pivot " + std::to_string(i) + " below 1e-13 ||A||");
    }
  }
  const char norm = '1';
  std::vector<double> work(3 * static_cast<std::size_t>(n_));
  std::vector<int> iwork(static_cast<std::size_t>(n_));
  dgbcon_(&norm, &n_, &kl_, &ku_, ab_.data(), &ldab_, ipiv_.data(), &anorm1, &rcond_, work.data(), iwork.data(), &info);
}

Vec BandLU::solve(const Vec& rhs) const {
  if (n_ == 0) throw JacobianSingular("solve with an unfactored matrix");
  if (rhs.size() != n_) throw DimensionMismatch("right-hand side length differs from the matrix");
  Vec x = rhs;
  const char trans = 'N';
  const int nrhs = 1;
  int info = 0;
  if (dense_) return dense_lu_->lu.solve(rhs);
  dgbtrs_(&trans, &n_, &kl_, &ku_, &nrhs, ab_.data(), &ldab_, ipiv_.data(), x.data(), &n_, &info);
  if (info != 0) throw JacobianSingular("dgbtrs failed");
  return x;
}

Vec solve_linear(const BlockJacobian& A, const Vec& rhs) { return BandLU(A).solve(rhs); }

// ---- ShootingProblem ----

ShootingProblem::ShootingProblem(const SpanningPath& path, DensityField mu, DensityField target, int K,
                                 IntegratorConfig cfg)
    : path_(&path), mu_(std::move(mu)), target_(std::move(target)), cfg_(cfg) {
  if (K < 1) throw ConfigError("K must be >= 1");
  if (!(mu_.grid == path.grid()) || !(target_.grid == path.grid())) {
    throw GridMismatch("shooting: densities and path live on different grids");
  }
  cfg_.validate();
  layout_.K = K;
  layout_.m = path.size();
}

void ShootingProblem::set_target(DensityField target) {
  if (!(target.grid == path_->grid())) throw GridMismatch("shooting: target lives on a different grid");
  target_ = std::move(target);
}

PhaseState ShootingProblem::start(const Vec& Z, int k) const {
  const auto m = static_cast<Eigen::Index>(layout_.m);
  DensityField rho = k == 0 ? mu_ : mass_closure(Z.segment(static_cast<Eigen::Index>(layout_.rho_offset(k)), m), path_->grid());
  ReducedVelocity v(Z.segment(static_cast<Eigen::Index>(layout_.v_offset(k)), m));
  return PhaseState{std::move(rho), std::move(v), layout_.breakpoint(k)};
}

Vec ShootingProblem::local_start(const Vec& Z, int k) const {
  const auto c0 = static_cast<Eigen::Index>(col0_of(layout_, k));
  return Z.segment(c0, static_cast<Eigen::Index>(cols_of(layout_, k)));
}

Vec ShootingProblem::endpoint_from_local(Propagator& prop, int k, const Vec& local) const {
  const auto m = static_cast<Eigen::Index>(layout_.m);
  const auto& grid = path_->grid();
  Vec rho;
  if (k == 0) {
    rho = mu_.values;
  } else {
    rho.resize(m + 1);
    rho.head(m) = local.head(m);
    const double w = grid.cell_volume();
    rho[m] = (1.0 - w * rho.head(m).sum()) / w;
  }
  ReducedVelocity v(local.tail(m));
  Vec S = reconstruct_potential(*path_, v, 0.0);
  try {
    prop.advance(rho, S, layout_.breakpoint(k), layout_.breakpoint(k + 1));
  } catch (const TrajectoryBlowUp& e) {
    throw TrajectoryBlowUp(e.t_fail(), std::string(e.what()) + " (subinterval " + std::to_string(k) + ")", k);
  }
  const bool last = k == layout_.K - 1;
  Vec out(last ? m : 2 * m);
  out.head(m) = rho.head(m);
  if (!last) out.tail(m) = restrict_potential(*path_, S).values;
  return out;
}

Vec ShootingProblem::residual(const Vec& Z) const {
  if (static_cast<std::size_t>(Z.size()) != layout_.size()) throw DimensionMismatch("Z has the wrong length");
  const auto m = static_cast<Eigen::Index>(layout_.m);
  Vec F(Z.size());
  Propagator prop(*path_, cfg_);
  for (int k = 0; k < layout_.K; ++k) {
    const Vec end = endpoint_from_local(prop, k, local_start(Z, k));
    const auto r0 = static_cast<Eigen::Index>(row0_of(layout_, k));
    if (k < layout_.K - 1) {
      F.segment(r0, m) = end.head(m) - Z.segment(static_cast<Eigen::Index>(layout_.rho_offset(k + 1)), m);
      F.segment(r0 + m, m) = end.tail(m) - Z.segment(static_cast<Eigen::Index>(layout_.v_offset(k + 1)), m);
    } else {
      F.segment(r0, m) = end - target_.values.head(m);
    }
  }
  return F;
}

BlockJacobian ShootingProblem::jacobian_fd(const Vec& Z, const ShootingConfig& cfg) const {
  if (static_cast<std::size_t>(Z.size()) != layout_.size()) throw DimensionMismatch("Z has the wrong length");
  const int K = layout_.K;
  BlockJacobian J;
  J.layout = layout_;
  J.G.resize(static_cast<std::size_t>(K));

  // Column tasks: (subinterval, local column), preceded by one base task per subinterval.
  std::vector<std::pair<int, long>> tasks;
  for (int k = 0; k < K; ++k) {
    J.G[static_cast<std::size_t>(k)].resize(static_cast<Eigen::Index>(rows_of(layout_, k)),
                                           static_cast<Eigen::Index>(cols_of(layout_, k)));
    tasks.emplace_back(k, -1);
  }
  std::vector<Vec> base(static_cast<std::size_t>(K));
  std::vector<Vec> locals(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) locals[static_cast<std::size_t>(k)] = local_start(Z, k);

  const int threads = worker_threads(cfg.threads);
  std::vector<std::unique_ptr<Propagator>> props;
  for (int t = 0; t < std::max(1, threads); ++t) props.push_back(std::make_unique<Propagator>(*path_, cfg_));

  // A failure here is the unperturbed trajectory itself and propagates as is.
  parallel_for(tasks.size(), threads, [&](std::size_t w, std::size_t i) {
    const int k = tasks[i].first;
    base[static_cast<std::size_t>(k)] = endpoint_from_local(*props[w], k, locals[static_cast<std::size_t>(k)]);
  });

  tasks.clear();
  for (int k = 0; k < K; ++k) {
    for (long c = 0; c < static_cast<long>(cols_of(layout_, k)); ++c) tasks.emplace_back(k, c);
  }
  try {
    parallel_for(tasks.size(), threads, [&](std::size_t w, std::size_t i) {
      const auto [k, c] = tasks[i];
      const auto ks = static_cast<std::size_t>(k);
      Vec local = locals[ks];
      const double z = local[c];
      const double h = std::max(cfg.fd_rel * std::max(1.0, std::abs(z)), cfg.fd_floor);
      local[c] = z + h;
      const double step = local[c] - z;  // exactly representable increment
      const Vec end = endpoint_from_local(*props[w], k, local);
      J.G[ks].col(c) = (end - base[ks]) / step;
    });
  } catch (const TrajectoryBlowUp& e) {
    throw JacobianIncomplete(std::string("perturbed trajectory failed: ") + e.what());
  }
  return J;
}

std::vector<DensityField> ShootingProblem::breakpoint_densities(const Vec& Z) const {
  std::vector<DensityField> out;
  for (int k = 0; k < layout_.K; ++k) out.push_back(start(Z, k).rho);
  Propagator prop(*path_, cfg_);
  const int k = layout_.K - 1;
  PhaseState s = start(Z, k);
  out.push_back(prop.integrate(s, layout_.breakpoint(k), 1.0).endpoint.rho);
  return out;
}

NewtonResult ShootingProblem::newton(const Vec& Z0, const ShootingConfig& cfg) const {
  cfg.validate();
  if (static_cast<std::size_t>(Z0.size()) != layout_.size()) throw DimensionMismatch("Z0 has the wrong length");
  const auto m = static_cast<Eigen::Index>(layout_.m);

  auto apply_barrier = [&](Vec& Z) {
    int hits = 0;
    if (!cfg.barrier) return hits;
    for (int k = 1; k < layout_.K; ++k) {
      auto seg = Z.segment(static_cast<Eigen::Index>(layout_.rho_offset(k)), m);
      for (Eigen::Index i = 0; i < m; ++i) {
        if (seg[i] < *cfg.barrier) {
          seg[i] = *cfg.barrier;
          ++hits;
        }
      }
    }
    return hits;
  };

  NewtonResult res;
  res.state.layout = layout_;
  res.state.Z = Z0;
  res.F = residual(res.state.Z);
  res.log.push_back({0, res.F.norm(), res.F.lpNorm<Eigen::Infinity>(), 0.0, 0, 0.0});

  BandLU lu;
  bool stopped = false;
  if (res.log.back().norm_inf < cfg.abs_stop) {
    stopped = true;
    res.stop_reason = "abs_stop";
  }
  for (int it = 1; !stopped && it <= cfg.max_iters; ++it) {
    if (!cfg.frozen_jacobian || !lu.factored()) lu.factor(jacobian_fd(res.state.Z, cfg));
    const Vec d = -lu.solve(res.F);
    res.state.Z += d;
    const int hits = apply_barrier(res.state.Z);
    Vec F_new = residual(res.state.Z);
    if (!F_new.allFinite()) throw NonFiniteState("newton: non-finite residual");
    const double change = (F_new - res.F).norm() / std::max(res.F.norm(), 1e-300);
    res.F = std::move(F_new);
    res.iterations = it;
    res.log.push_back({it, res.F.norm(), res.F.lpNorm<Eigen::Infinity>(), d.norm(), hits, lu.rcond()});
    if (res.log.back().norm_inf < cfg.abs_stop) {
      stopped = true;
      res.stop_reason = "abs_stop";
    } else if (change < cfg.rel_stop) {
      stopped = true;
      res.stop_reason = "rel_stop";
    }
  }

  bool nonnegative = true;
  for (int k = 1; k < layout_.K; ++k) nonnegative = nonnegative && start(res.state.Z, k).rho.min() >= 0.0;
  res.success = res.F.lpNorm<Eigen::Infinity>() <= cfg.success_tol && nonnegative;
  if (!stopped) {
    res.stop_reason = "max_iters";
    if (!res.success) {
      throw MaxIterationsExceeded("newton: no convergence in " + std::to_string(cfg.max_iters) +
                                  " iterations, ||F||_inf=" + std::to_string(res.F.lpNorm<Eigen::Infinity>()));
    }
  }
  return res;
}

// ---- free functions ----

Vec residual(const SpanningPath& path, const ShootingState& Z, const DensityField& mu, const DensityField& nu,
             const IntegratorConfig& cfg) {
  return ShootingProblem(path, mu, nu, Z.layout.K, cfg).residual(Z.Z);
}

BlockJacobian jacobian_fd(const SpanningPath& path, const ShootingState& Z, const DensityField& mu,
                          const DensityField& nu, const IntegratorConfig& cfg, const ShootingConfig& shoot) {
  return ShootingProblem(path, mu, nu, Z.layout.K, cfg).jacobian_fd(Z.Z, shoot);
}

NewtonResult newton_solve(const SpanningPath& path, const ShootingState& Z0, const DensityField& mu,
                          const DensityField& nu, const IntegratorConfig& cfg_int, const ShootingConfig& cfg_shoot) {
  return ShootingProblem(path, mu, nu, Z0.layout.K, cfg_int).newton(Z0.Z, cfg_shoot);
}

}  // namespace otg
