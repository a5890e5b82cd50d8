#include "otg/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "otg/errors.hpp"

namespace otg {

void ContinuationSchedule::validate() const {
  if (!(lambda0 > 0.0 && lambda0 <= 1.0)) throw ConfigError("lambda0 must lie in (0, 1]");
  if (L < 2) throw ConfigError("L must be >= 2");
  if (max_shrinks < 0) throw ConfigError("max_shrinks must be >= 0");
}

std::vector<double> GeodesicSolution::lambdas() const {
  std::vector<double> out;
  for (const auto& r : continuation_log) {
    if (r.accepted) out.push_back(r.lambda);
  }
  return out;
}

int GeodesicSolution::total_newton_iterations() const {
  int n = 0;
  for (const auto& r : continuation_log) n += r.iterations;
  return n;
}

namespace {

std::vector<GaussianBump> bumps_of(const DensitySpec& spec) {
  if (const auto* g = std::get_if<GaussianSpec>(&spec.shape)) return {GaussianBump{g->rates, g->centers, 1.0}};
  if (const auto* m = std::get_if<GaussianMixtureSpec>(&spec.shape)) return m->bumps;
  throw KindMismatch("the Gaussian homotopy needs Gaussian endpoint densities");
}

std::vector<GaussianBump> split(const GaussianBump& b, std::size_t k) {
  GaussianBump part = b;
  part.weight = b.weight / static_cast<double>(k);
  return std::vector<GaussianBump>(k, part);
}

std::vector<double> lerp(const std::vector<double>& a, const std::vector<double>& b, double t) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + t * (b[i] - a[i]);
  return out;
}

}  // namespace

DensityField homotopy(const DensitySpec& mu, const DensitySpec& nu, double lambda, HomotopyKind kind,
                      const LatticeGrid& grid) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (kind == HomotopyKind::LinearPath) {
    if (lambda == 0.0) return realize(mu, grid);
    if (lambda == 1.0) return realize(nu, grid);
    return linear_blend(realize(mu, grid), realize(nu, grid), lambda);
  }
  auto a = bumps_of(mu);
  auto b = bumps_of(nu);
  if (lambda == 0.0) return realize(mu, grid);
  if (lambda == 1.0) return realize(nu, grid);
  if (a.size() == 1 && b.size() > 1) a = split(a[0], b.size());
  if (b.size() == 1 && a.size() > 1) b = split(b[0], a.size());
  if (a.size() != b.size()) throw KindMismatch("Gaussian homotopy: bump counts cannot be matched");
  GaussianMixtureSpec mix;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].rates.size() != b[i].rates.size()) throw DimensionMismatch("Gaussian homotopy: dimension mismatch");
    mix.bumps.push_back(GaussianBump{lerp(a[i].rates, b[i].rates, lambda), lerp(a[i].centers, b[i].centers, lambda),
                                     a[i].weight + lambda * (b[i].weight - a[i].weight)});
  }
  return realize(DensitySpec{mix, mu.shift + lambda * (nu.shift - mu.shift)}, grid);
}

ShootingState initial_guess(const DensityField& mu, const DensityField& target, int K) {
  if (K < 1) throw ConfigError("K must be >= 1");
  if (!(mu.grid == target.grid)) throw GridMismatch("initial_guess: densities live on different grids");
  ShootingState s;
  s.layout.K = K;
  s.layout.m = mu.grid.node_count() - 1;
  s.Z = Vec::Zero(static_cast<Eigen::Index>(s.layout.size()));
  const auto m = static_cast<Eigen::Index>(s.layout.m);
  for (int k = 1; k < K; ++k) {
    const double t = s.layout.breakpoint(k);
    s.Z.segment(static_cast<Eigen::Index>(s.layout.rho_offset(k)), m) =
        ((1.0 - t) * mu.values + t * target.values).head(m);
  }
  return s;
}

const std::vector<double>& default_snapshot_times() {
  static const std::vector<double> times{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  return times;
}

std::vector<Snapshot> sample_trajectory(const ShootingProblem& problem, const Vec& Z, const std::vector<double>& times) {
  const auto& L = problem.layout();
  const int steps = problem.integrator().steps;
  const long total = static_cast<long>(L.K) * steps;
  const double dt = 1.0 / static_cast<double>(total);

  // Global step index wanted for each requested time.
  std::vector<long> wanted;
  for (double t : times) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("snapshot times must lie in [0, 1]");
    wanted.push_back(std::clamp(std::lround(t * static_cast<double>(total)), 0L, total));
  }
  std::vector<Snapshot> out(times.size());
  Propagator prop(problem.path(), problem.integrator());
  for (int k = 0; k < L.K; ++k) {
    const long first = static_cast<long>(k) * steps;
    const long last = first + steps;
    bool needed = false;
    for (long g : wanted) needed = needed || (g >= first && g <= last);
    if (!needed) continue;
    PhaseState s = problem.start(Z, k);
    for (std::size_t i = 0; i < wanted.size(); ++i) {
      if (wanted[i] == first) out[i] = Snapshot{static_cast<double>(first) * dt, s.rho};
    }
    long g = first;
    StepObserver obs = [&](double, const Vec& rho) {
      ++g;
      for (std::size_t i = 0; i < wanted.size(); ++i) {
        // Interior breakpoints are taken from the next subinterval's start.
        if (wanted[i] == g && (g != last || k == L.K - 1)) {
          out[i] = Snapshot{static_cast<double>(g) * dt, DensityField{problem.path().grid(), rho}};
        }
      }
    };
    Vec rho = s.rho.values;
    Vec S = reconstruct_potential(problem.path(), s.vhat, 0.0);
    prop.advance(rho, S, L.breakpoint(k), L.breakpoint(k + 1), nullptr, &obs);
  }
  return out;
}

GeodesicSolution run(const Problem& problem, const ContinuationSchedule& sched, const IntegratorConfig& cfg_int,
                     const ShootingConfig& cfg_shoot, const std::vector<double>& snapshot_times) {
  sched.validate();
  cfg_shoot.validate();
  const SpanningPath path(problem.grid);
  GeodesicSolution sol;
  sol.mu = realize(problem.mu, problem.grid);
  sol.nu = realize(problem.nu, problem.grid);
  ShootingProblem shoot(path, sol.mu, sol.nu, problem.K, cfg_int);

  std::string last_cause;
  auto attempt = [&](double lambda, const Vec& Z0, int shrinks) -> std::optional<NewtonResult> {
    shoot.set_target(lambda == 1.0 ? sol.nu : homotopy(problem.mu, problem.nu, lambda, problem.kind, problem.grid));
    ContinuationRecord rec{lambda, 0, 0.0, shrinks, false, {}};
    std::optional<NewtonResult> out;
    try {
      NewtonResult r = shoot.newton(Z0, cfg_shoot);
      rec.iterations = r.iterations;
      rec.residual_inf = r.F.lpNorm<Eigen::Infinity>();
      sol.newton_logs.push_back({lambda, r.log});
      if (r.success) {
        rec.accepted = true;
        out = std::move(r);
      } else {
        rec.cause = "newton stopped (" + r.stop_reason + ") without meeting the success criterion";
      }
    } catch (const Error& e) {
      rec.cause = e.what();
    }
    if (!rec.accepted) last_cause = rec.cause;
    sol.continuation_log.push_back(rec);
    return out;
  };

  std::optional<NewtonResult> current;
  if (sched.try_direct_first) current = attempt(1.0, initial_guess(sol.mu, sol.nu, problem.K).Z, 0);

  if (!current) {
    // Starting point: lambda0, halved on failure.
    double lambda = sched.lambda0;
    int shrinks = 0;
    std::optional<NewtonResult> start;
    while (true) {
      const DensityField target =
          lambda == 1.0 ? sol.nu : homotopy(problem.mu, problem.nu, lambda, problem.kind, problem.grid);
      start = attempt(lambda, initial_guess(sol.mu, target, problem.K).Z, shrinks);
      if (start) break;
      if (++shrinks > sched.max_shrinks) throw ContinuationStalled(0.0, last_cause);
      lambda *= 0.5;
    }
    if (lambda < 1.0) ++sol.continuation_steps;

    // Shrinks accumulate over the whole path; resetting them after an accepted
    // step lets the step size decay without bound near a singular lambda.
    int L = sched.L;
    double step = (1.0 - lambda) / L;
    shrinks = 0;
    while (lambda < 1.0) {
      double next = lambda + step;
      if (next > 1.0 - 1e-12) next = 1.0;
      auto r = attempt(next, start->state.Z, shrinks);
      if (r) {
        lambda = next;
        start = std::move(r);
        if (lambda < 1.0) ++sol.continuation_steps;
      } else {
        if (++shrinks > sched.max_shrinks) throw ContinuationStalled(lambda, last_cause);
        L *= 2;
        step = (1.0 - lambda) / L;
      }
    }
    current = std::move(start);
  }

  shoot.set_target(sol.nu);
  sol.Z_star = current->state;
  sol.residual_inf = current->F.lpNorm<Eigen::Infinity>();
  const auto m = static_cast<Eigen::Index>(sol.Z_star.layout.m);
  const ReducedVelocity v0(sol.Z_star.Z.head(m));
  sol.distance = wasserstein_distance(path, sol.mu, v0);
  sol.S0 = reconstruct_potential(path, v0, 0.0);

  const auto bps = shoot.breakpoint_densities(sol.Z_star.Z);
  sol.boundary_residual = (bps.back().values - sol.nu.values).lpNorm<Eigen::Infinity>();
  sol.min_breakpoint_density = bps.front().min();
  for (std::size_t k = 0; k + 1 < bps.size(); ++k) sol.min_breakpoint_density = std::min(sol.min_breakpoint_density, bps[k].min());
  sol.snapshots = sample_trajectory(shoot, sol.Z_star.Z, snapshot_times);
  return sol;
}

}  // namespace otg
