#include <cmath>
#include <cstdio>
#include <fstream>

#include "otg/cli.hpp"
#include "otg/errors.hpp"

namespace otg::cli {

namespace fs = std::filesystem;

std::string real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Eigen::MatrixXd node_velocity(const LatticeGrid& grid, const Vec& S) {
  const auto N = grid.node_count();
  const int d = grid.dim();
  const int period = grid.nodes_per_axis();
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), d);
  for (std::size_t f = 0; f < N; ++f) {
    auto idx = grid.multi(f);
    for (int a = 0; a < d; ++a) {
      auto next = idx;
      auto& c = next[static_cast<std::size_t>(a)];
      if (c + 1 < period) {
        ++c;
      } else if (grid.boundary() == Boundary::Periodic) {
        c = 0;
      } else {
        continue;
      }
      v(static_cast<Eigen::Index>(f), a) = (S[static_cast<Eigen::Index>(grid.flat(next))] - S[static_cast<Eigen::Index>(f)]) / grid.spacing();
    }
  }
  return v;
}

Eigen::MatrixXd reference_velocity_ex1(const LatticeGrid& grid, double beta) {
  return -exact_initial_velocity_ex1(grid, beta);
}

VelocityError ex1_velocity_error(const LatticeGrid& grid, const Vec& S0, double beta) {
  const Eigen::MatrixXd err = node_velocity(grid, S0) - reference_velocity_ex1(grid, beta);
  const Vec norms = err.rowwise().norm();
  return VelocityError{norms.maxCoeff(), std::sqrt(norms.squaredNorm() * grid.cell_volume())};
}

namespace {

std::ofstream open(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

void coord_header(std::ostream& out, int dim) {
  for (int a = 0; a < dim; ++a) out << (a ? "," : "") << "x" << a + 1;
}

void coords(std::ostream& out, const LatticeGrid& grid, std::size_t f) {
  for (int a = 0; a < grid.dim(); ++a) out << (a ? "," : "") << real(grid.coordinate(f, a));
}

const MongeAmpereSpec* monge_ampere(const RunConfig& cfg) {
  return std::get_if<MongeAmpereSpec>(&cfg.mu.shape);
}

}  // namespace

void write_outputs(const RunConfig& cfg, const RunOutcome& run, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& sol = run.solution;
  const LatticeGrid& grid = sol.mu.grid;

  nlohmann::json j;
  j["name"] = cfg.name;
  j["distance"] = sol.distance;
  j["residual_inf"] = sol.residual_inf;
  j["boundary_residual"] = sol.boundary_residual;
  j["min_breakpoint_density"] = sol.min_breakpoint_density;
  j["lambdas"] = sol.lambdas();
  j["continuation_steps"] = sol.continuation_steps;
  j["newton_iterations_total"] = sol.total_newton_iterations();
  std::vector<int> accepted_iters;
  for (const auto& r : sol.continuation_log) {
    if (r.accepted) accepted_iters.push_back(r.iterations);
  }
  j["newton_iterations"] = accepted_iters;
  j["nodes"] = grid.node_count();
  j["dx"] = grid.spacing();
  j["K"] = sol.Z_star.layout.K;
  j["steps"] = cfg.integrator.steps;
  j["seconds"] = run.seconds;
  if (const auto* ma = monge_ampere(cfg); ma && grid.dim() == 2) {
    const auto e = ex1_velocity_error(grid, sol.S0, ma->beta);
    j["max_error"] = e.max_error;
    j["l2_error"] = e.l2_error;
  }
  j["config"] = to_json(cfg);
  {
    auto out = open(dir / "solution.json");
    // dump() prints doubles with round-trip precision
    out << j.dump(2) << "\n";
  }

  {
    auto out = open(dir / "snapshots.csv");
    out << "t,";
    coord_header(out, grid.dim());
    out << ",rho\n";
    for (const auto& s : sol.snapshots) {
      for (std::size_t f = 0; f < grid.node_count(); ++f) {
        out << real(s.t) << ",";
        coords(out, grid, f);
        out << "," << real(s.rho.values[static_cast<Eigen::Index>(f)]) << "\n";
      }
    }
  }

  {
    const Eigen::MatrixXd v = node_velocity(grid, sol.S0);
    auto out = open(dir / "velocity0.csv");
    coord_header(out, grid.dim());
    out << ",S0";
    for (int a = 0; a < grid.dim(); ++a) out << ",v" << a + 1;
    out << "\n";
    for (std::size_t f = 0; f < grid.node_count(); ++f) {
      coords(out, grid, f);
      out << "," << real(sol.S0[static_cast<Eigen::Index>(f)]);
      for (int a = 0; a < grid.dim(); ++a) out << "," << real(v(static_cast<Eigen::Index>(f), a));
      out << "\n";
    }
  }

  {
    auto out = open(dir / "newton_log.csv");
    out << "lambda,iteration,norm2,norm_inf,step_norm,barrier_hits,rcond\n";
    for (const auto& a : sol.newton_logs) {
      for (const auto& r : a.log) {
        out << real(a.lambda) << "," << r.iteration << "," << real(r.norm2) << "," << real(r.norm_inf) << ","
            << real(r.step_norm) << "," << r.barrier_hits << "," << real(r.rcond) << "\n";
      }
    }
  }

  {
    auto out = open(dir / "continuation_log.csv");
    out << "lambda,iterations,residual_inf,shrinks,accepted\n";
    for (const auto& r : sol.continuation_log) {
      out << real(r.lambda) << "," << r.iterations << "," << real(r.residual_inf) << "," << r.shrinks << ","
          << (r.accepted ? 1 : 0) << "\n";
    }
  }

  if (const auto* ma = monge_ampere(cfg); ma && grid.dim() == 2) {
    const Eigen::MatrixXd v = node_velocity(grid, sol.S0);
    const Eigen::MatrixXd formula = exact_initial_velocity_ex1(grid, ma->beta);
    const Eigen::MatrixXd exact = reference_velocity_ex1(grid, ma->beta);
    auto out = open(dir / "error_vs_exact.csv");
    out << "x1,x2,v1,v2,formula1,formula2,exact1,exact2,error\n";
    for (std::size_t f = 0; f < grid.node_count(); ++f) {
      const auto r = static_cast<Eigen::Index>(f);
      coords(out, grid, f);
      out << "," << real(v(r, 0)) << "," << real(v(r, 1)) << "," << real(formula(r, 0)) << "," << real(formula(r, 1))
          << "," << real(exact(r, 0)) << "," << real(exact(r, 1)) << "," << real((v.row(r) - exact.row(r)).norm())
          << "\n";
    }
  }
}

}  // namespace otg::cli
