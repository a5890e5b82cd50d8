#pragma once

#include <string>
#include <vector>

#include "otg/shooting.hpp"

namespace otg {

enum class HomotopyKind { GaussianPath, LinearPath };

struct ContinuationSchedule {
  double lambda0 = 0.1;
  int L = 20;
  int max_shrinks = 6;
  bool try_direct_first = true;

  void validate() const;
};

struct Problem {
  LatticeGrid grid;
  DensitySpec mu;
  DensitySpec nu;
  HomotopyKind kind = HomotopyKind::LinearPath;
  int K = 1;
};

struct ContinuationRecord {
  double lambda = 0.0;
  int iterations = 0;
  double residual_inf = 0.0;
  int shrinks = 0;  // failures so far on this phase (lambda0 search, then the path)
  bool accepted = false;
  std::string cause;  // failure reason when not accepted
};

struct NewtonAttempt {
  double lambda = 0.0;
  std::vector<NewtonRecord> log;
};

struct Snapshot {
  double t = 0.0;
  DensityField rho;
};

struct GeodesicSolution {
  ShootingState Z_star;
  DensityField mu;
  DensityField nu;
  double distance = 0.0;
  Vec S0;
  std::vector<Snapshot> snapshots;
  std::vector<ContinuationRecord> continuation_log;
  std::vector<NewtonAttempt> newton_logs;
  double residual_inf = 0.0;
  double boundary_residual = 0.0;  // ||rho(1) - nu||_inf over all nodes
  double min_breakpoint_density = 0.0;
  int continuation_steps = 0;  // accepted solves with lambda < 1

  // Accepted lambda values in order, ending at 1.
  std::vector<double> lambdas() const;
  int total_newton_iterations() const;
};

/// f(mu, nu, lambda): endpoints are exactly realize(mu) and realize(nu).
/// GaussianPath interpolates bump rates, centers, weights and the shift
/// linearly, then normalizes. A single bump facing k bumps is split into k
/// copies of weight 1/k so both ends are represented.
DensityField homotopy(const DensitySpec& mu, const DensitySpec& nu, double lambda, HomotopyKind kind,
                      const LatticeGrid& grid);

/// v-blocks zero, rho^k = (1 - t_k) mu + t_k target at t_k = k / K.
ShootingState initial_guess(const DensityField& mu, const DensityField& target, int K);

/// Densities along the trajectory generated by Z, at the step nearest to each
/// requested time. The recorded t is the actual step time.
std::vector<Snapshot> sample_trajectory(const ShootingProblem& problem, const Vec& Z, const std::vector<double>& times);

const std::vector<double>& default_snapshot_times();

GeodesicSolution run(const Problem& problem, const ContinuationSchedule& sched, const IntegratorConfig& cfg_int,
                     const ShootingConfig& cfg_shoot, const std::vector<double>& snapshot_times = default_snapshot_times());

}  // namespace otg
