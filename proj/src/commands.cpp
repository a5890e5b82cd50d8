#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include "otg/cli.hpp"
#include "otg/errors.hpp"

namespace otg::cli {

RunOutcome execute(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutcome out{run(cfg.problem(), cfg.continuation, cfg.integrator, cfg.shooting, cfg.snapshot_times), 0.0};
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

namespace {

int run_and_write(const RunConfig& cfg, const std::optional<std::string>& out_dir) {
  const std::filesystem::path dir = out_dir ? std::filesystem::path(*out_dir) : std::filesystem::path(cfg.out_dir);
  try {
    const RunOutcome r = execute(cfg);
    write_outputs(cfg, r, dir);
    std::cout << cfg.name << ": distance " << real(r.solution.distance) << ", residual "
              << r.solution.residual_inf << ", " << r.solution.total_newton_iterations() << " Newton iterations, "
              << r.solution.continuation_steps << " continuation steps, " << r.seconds << " s -> " << dir.string()
              << "\n";
    return 0;
  } catch (const ContinuationStalled& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int cmd_solve(const std::string& config_path, const std::optional<std::string>& out_dir) {
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  }
  return run_and_write(cfg, out_dir);
}

int cmd_example(const std::string& name, const std::optional<std::string>& out_dir) {
  RunConfig cfg;
  try {
    cfg = example_config(name);
  } catch (const UnknownExample& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return run_and_write(cfg, out_dir);
}

int cmd_convergence(bool full, const std::optional<std::string>& out_dir) {
  const std::filesystem::path dir = out_dir ? std::filesystem::path(*out_dir) : std::filesystem::path("out/convergence");
  std::vector<int> sizes{16, 32};
  if (full) {
    sizes.push_back(64);
    sizes.push_back(128);
  }
  struct Row {
    int n;
    VelocityError err;
    int iterations;
    double seconds;
  };
  std::vector<Row> rows;
  try {
    for (int n : sizes) {
      const RunConfig cfg = ex1_config(n);
      const RunOutcome r = execute(cfg);
      const double beta = std::get<MongeAmpereSpec>(cfg.mu.shape).beta;
      rows.push_back({n, ex1_velocity_error(r.solution.mu.grid, r.solution.S0, beta),
                      r.solution.total_newton_iterations(), r.seconds});
      std::cout << "dx=1/" << n << ": max " << real(rows.back().err.max_error) << ", L2 "
                << real(rows.back().err.l2_error) << ", " << rows.back().iterations << " iterations\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "table1.csv");
  out << "dx,max_error,l2_error,iterations,seconds,order_max,order_l2\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << real(1.0 / rows[i].n) << "," << real(rows[i].err.max_error) << "," << real(rows[i].err.l2_error) << ","
        << rows[i].iterations << "," << real(rows[i].seconds) << ",";
    if (i == 0) {
      out << ",\n";
    } else {
      const double h = std::log(static_cast<double>(rows[i].n) / rows[i - 1].n);
      out << real(std::log(rows[i - 1].err.max_error / rows[i].err.max_error) / h) << ","
          << real(std::log(rows[i - 1].err.l2_error / rows[i].err.l2_error) / h) << "\n";
    }
  }
  return 0;
}

}  // namespace otg::cli
