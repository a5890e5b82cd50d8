#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "otg/continuation.hpp"

namespace otg::cli {

struct GridConfig {
  int dim = 1;
  int n = 10;
  double lower = 0.0;
  double upper = 1.0;
  Boundary boundary = Boundary::NoFlux;

  LatticeGrid make() const { return LatticeGrid(dim, n, lower, upper, boundary); }
};

struct RunConfig {
  std::string name = "run";
  GridConfig grid;
  DensitySpec mu{UniformSpec{}, 0.0};
  DensitySpec nu{UniformSpec{}, 0.0};
  HomotopyKind homotopy = HomotopyKind::LinearPath;
  int K = 1;
  IntegratorConfig integrator;
  ShootingConfig shooting;
  ContinuationSchedule continuation;
  std::string out_dir = "out";
  std::vector<double> snapshot_times = default_snapshot_times();

  Problem problem() const { return Problem{grid.make(), mu, nu, homotopy, K}; }
};

/// Parse and validate; throws ConfigError on unknown keys, missing fields or
/// values that fail validation.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

/// Registered examples ex1..ex10.
const std::vector<std::string>& example_names();
RunConfig example_config(const std::string& name);

/// ex1 at n cells per axis (n = 16 is the registered example).
RunConfig ex1_config(int n);

struct VelocityError {
  double max_error = 0.0;
  double l2_error = 0.0;
};

/// Per-node forward-difference velocity (S_{i+e_k} - S_i) / dx, one column
/// per axis. Periodic grids wrap; NoFlux boundary nodes get 0 across the
/// missing edge.
Eigen::MatrixXd node_velocity(const LatticeGrid& grid, const Vec& S);

/// Initial velocity of the transport from det(I - D^2 phi) to the uniform
/// density, i.e. -grad phi = -exact_initial_velocity_ex1. With v = grad S the
/// map is x + grad S0, so S0 = -phi.
Eigen::MatrixXd reference_velocity_ex1(const LatticeGrid& grid, double beta);

/// Error of the forward-difference velocity of S0 against
/// reference_velocity_ex1. Max is over nodes of the Euclidean error; L2 uses
/// the dx^d quadrature.
VelocityError ex1_velocity_error(const LatticeGrid& grid, const Vec& S0, double beta);

struct RunOutcome {
  GeodesicSolution solution;
  double seconds = 0.0;
};

RunOutcome execute(const RunConfig& cfg);

/// Writes solution.json, snapshots.csv, velocity0.csv, newton_log.csv,
/// continuation_log.csv (and error_vs_exact.csv for Monge-Ampere problems).
void write_outputs(const RunConfig& cfg, const RunOutcome& run, const std::filesystem::path& dir);

/// Real formatted with 17 significant digits.
std::string real(double x);

int cmd_solve(const std::string& config_path, const std::optional<std::string>& out_dir);
int cmd_example(const std::string& name, const std::optional<std::string>& out_dir);
int cmd_convergence(bool full, const std::optional<std::string>& out_dir);

}  // namespace otg::cli
