#pragma once

#include <functional>
#include <memory>

#include "otg/dynamics.hpp"

namespace otg {

enum class Scheme { SymplecticEuler, ExplicitRK4 };

struct IntegratorConfig {
  Scheme scheme = Scheme::SymplecticEuler;
  int steps = 20;  // per subinterval
  double blowup_threshold = 1e8;

  void validate() const;
};

struct TrajectoryDiagnostics {
  double mass_drift = 0.0;
  double energy_drift = 0.0;
  double min_density = 0.0;
};

struct SubintervalResult {
  PhaseState endpoint;
  TrajectoryDiagnostics diag;
};

// Called after every step with the current time and full density.
using StepObserver = std::function<void(double t, const Vec& rho)>;

/**
 * Fixed-step integrator working in (rho, S) variables. Holds the linear-solve
 * workspace of the symplectic scheme, so one instance must not be shared
 * between threads; copies are independent.
 *
 * Symplectic Euler: (I - dt L(S)) rho' = rho, then S' = S - dt dH/drho(S),
 * where L(S) rho is the continuity right-hand side (linear in rho).
 */
class Propagator {
 public:
  Propagator(const SpanningPath& path, const IntegratorConfig& cfg);
  Propagator(const Propagator& other);
  Propagator& operator=(const Propagator&) = delete;
  ~Propagator();

  const SpanningPath& path() const { return *path_; }
  const IntegratorConfig& config() const { return cfg_; }

  // Advance (rho, S) in place from t0 to t1 in cfg.steps equal steps.
  void advance(Vec& rho, Vec& S, double t0, double t1, TrajectoryDiagnostics* diag = nullptr,
               const StepObserver* observer = nullptr);

  // One step of the configured scheme, in place.
  void step(Vec& rho, Vec& S, double dt);

  SubintervalResult integrate(const PhaseState& state0, double t0, double t1, const StepObserver* observer = nullptr);

 private:
  void symplectic_step(Vec& rho, Vec& S, double dt);
  void rk4_step(Vec& rho, Vec& S, double dt);

  const SpanningPath* path_;
  IntegratorConfig cfg_;
  struct Solver;
  std::unique_ptr<Solver> solver_;
  Vec k1r_, k2r_, k3r_, k4r_, k1s_, k2s_, k3s_, k4s_, tmp_r_, tmp_s_;
};

/// One step of size dt.
PhaseState step(const SpanningPath& path, const PhaseState& state, double dt, Scheme scheme);

/// cfg.steps equal steps over [t0, t1]. Throws TrajectoryBlowUp when a state
/// entry becomes non-finite or exceeds cfg.blowup_threshold in magnitude.
SubintervalResult integrate_subinterval(const SpanningPath& path, const PhaseState& state0, double t0, double t1,
                                        const IntegratorConfig& cfg);

}  // namespace otg
