#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "otg/cli.hpp"
#include "otg/errors.hpp"

using namespace otg;
using namespace otg::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("otg_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

json small_config() {
  return json::parse(R"({
    "name": "small",
    "grid": {"dim": 1, "n": 20, "lower": -0.5, "upper": 2.5},
    "mu": {"type": "gaussian", "rates": [15], "centers": [0.4], "shift": 1e-4},
    "nu": {"type": "gaussian", "rates": [15], "centers": [1.4], "shift": 1e-4},
    "homotopy": "gaussian",
    "K": 3,
    "integrator": {"steps": 20},
    "output": {"snapshot_times": [0, 0.5, 1]}
  })");
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Csv read_csv(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  Csv c;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  std::getline(in, line);
  c.header = split(line);
  while (std::getline(in, line)) c.rows.push_back(split(line));
  return c;
}

double num(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

void write_json(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("config parsing and validation") {
  const RunConfig c = parse_config(small_config());
  CHECK(c.name == "small");
  CHECK(c.grid.n == 20);
  CHECK(c.K == 3);
  CHECK(c.homotopy == HomotopyKind::GaussianPath);
  CHECK(c.integrator.steps == 20);
  CHECK(c.snapshot_times == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(c.mu.shift == 1e-4);

  // to_json round-trips.
  const RunConfig back = parse_config(to_json(c));
  CHECK(to_json(back) == to_json(c));

  json dx = small_config();
  dx["grid"].erase("n");
  dx["grid"]["dx"] = 0.15;
  CHECK(parse_config(dx).grid.n == 20);

  auto rejects = [](json j) { CHECK_THROWS_AS(parse_config(j), ConfigError); };
  json j = small_config();
  j["colour"] = "blue";
  rejects(j);
  j = small_config();
  j["grid"]["spacing"] = 0.1;
  rejects(j);
  j = small_config();
  j["shooting"] = {{"tolerance", 1e-6}};
  rejects(j);
  j = small_config();
  j.erase("mu");
  rejects(j);
  j = small_config();
  j["grid"]["dx"] = 0.1;
  rejects(j);  // both n and dx
  j = small_config();
  j["K"] = 0;
  rejects(j);
  j = small_config();
  j["integrator"]["steps"] = 0;
  rejects(j);
  j = small_config();
  j["mu"]["type"] = "cauchy";
  rejects(j);
  j = small_config();
  j["mu"] = {{"type", "uniform"}};
  rejects(j);  // Gaussian homotopy with a uniform endpoint
  j = small_config();
  j["continuation"] = {{"L", 1}};
  rejects(j);
  j = small_config();
  j["output"]["snapshot_times"] = {0.0, 1.5};
  rejects(j);
  j = small_config();
  j["grid"]["boundary"] = "reflecting";
  rejects(j);
}

TEST_CASE("malformed configs exit with 3 and write nothing") {
  const fs::path dir = scratch("bad");
  fs::create_directories(dir);
  const fs::path out = dir / "out";
  write_json(dir / "broken.json", "{ \"grid\": ");
  CHECK(cmd_solve((dir / "broken.json").string(), out.string()) == 3);
  CHECK_FALSE(fs::exists(out));
  write_json(dir / "unknown.json", "{\"grid\": {\"dim\": 1, \"n\": 4, \"lower\": 0, \"upper\": 1}, \"mu\": "
                                   "{\"type\": \"uniform\"}, \"nu\": {\"type\": \"uniform\"}, \"extra\": 1}");
  CHECK(cmd_solve((dir / "unknown.json").string(), out.string()) == 3);
  CHECK_FALSE(fs::exists(out));
  CHECK(cmd_solve((dir / "missing.json").string(), out.string()) == 3);
  CHECK(cmd_example("ex11", out.string()) == 3);
  CHECK_FALSE(fs::exists(out));
  fs::remove_all(dir);
}

TEST_CASE("identity config gives distance zero") {
  const fs::path dir = scratch("identity");
  fs::create_directories(dir);
  json j = small_config();
  j["nu"] = j["mu"];
  write_json(dir / "cfg.json", j.dump());
  REQUIRE(cmd_solve((dir / "cfg.json").string(), (dir / "out").string()) == 0);
  std::ifstream in(dir / "out" / "solution.json");
  const json s = json::parse(in);
  CHECK(std::abs(s.at("distance").get<double>()) <= 1e-8);
  CHECK(s.at("continuation_steps").get<int>() == 0);
  CHECK(s.at("lambdas") == json::array({1.0}));
  fs::remove_all(dir);
}

TEST_CASE("outputs round-trip and agree with the solution") {
  const RunConfig cfg = parse_config(small_config());
  const RunOutcome run = execute(cfg);
  const fs::path dir = scratch("outputs");
  write_outputs(cfg, run, dir);
  const auto& sol = run.solution;
  const LatticeGrid& g = sol.mu.grid;
  const auto N = g.node_count();

  for (const char* f : {"solution.json", "snapshots.csv", "velocity0.csv", "newton_log.csv", "continuation_log.csv"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK_FALSE(fs::exists(dir / "error_vs_exact.csv"));

  const Csv snaps = read_csv(dir / "snapshots.csv");
  CHECK(snaps.header == std::vector<std::string>{"t", "x1", "rho"});
  REQUIRE(snaps.rows.size() == 3 * N);
  for (std::size_t s = 0; s < 3; ++s) {
    double sum = 0.0;
    for (std::size_t f = 0; f < N; ++f) {
      const auto& row = snaps.rows[s * N + f];
      CHECK(num(row[0]) == sol.snapshots[s].t);
      CHECK(num(row[1]) == g.coordinate(f, 0));
      CHECK(num(row[2]) == sol.snapshots[s].rho.values[static_cast<Eigen::Index>(f)]);
      sum += num(row[2]);
    }
    CHECK(sum == doctest::Approx(1.0 / g.spacing()).epsilon(1e-12));
  }

  // Distance recomputed from the written potential.
  const Csv vel = read_csv(dir / "velocity0.csv");
  CHECK(vel.header == std::vector<std::string>{"x1", "S0", "v1"});
  REQUIRE(vel.rows.size() == N);
  Vec S0(static_cast<Eigen::Index>(N));
  for (std::size_t f = 0; f < N; ++f) S0[static_cast<Eigen::Index>(f)] = num(vel.rows[f][1]);
  CHECK(S0 == sol.S0);
  const SpanningPath path(g);
  const double d = wasserstein_distance(path, sol.mu, restrict_potential(path, S0));
  std::ifstream in(dir / "solution.json");
  const json js = json::parse(in);
  CHECK(std::abs(js.at("distance").get<double>() - d) <= 1e-10);
  CHECK(js.at("distance").get<double>() == sol.distance);
  CHECK(js.at("config") == to_json(cfg));

  const Csv cont = read_csv(dir / "continuation_log.csv");
  CHECK(cont.header.front() == "lambda");
  REQUIRE(cont.rows.size() == sol.continuation_log.size());
  CHECK(num(cont.rows.back()[0]) == 1.0);
  CHECK(num(cont.rows.back()[2]) == sol.continuation_log.back().residual_inf);

  const Csv newton = read_csv(dir / "newton_log.csv");
  std::size_t expected = 0;
  for (const auto& a : sol.newton_logs) expected += a.log.size();
  CHECK(newton.rows.size() == expected);
  fs::remove_all(dir);
}

TEST_CASE("real() keeps 17 significant digits") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-17, 12345.678901234567, 5e-324}) CHECK(num(real(x)) == x);
}

TEST_CASE("example registry") {
  CHECK(example_names().size() == 10);
  for (const auto& n : example_names()) {
    const RunConfig c = example_config(n);
    CHECK(c.name == n);
    CHECK_NOTHROW(parse_config(to_json(c)));
  }
  CHECK_THROWS_AS(example_config("ex0"), UnknownExample);

  const RunConfig e1 = example_config("ex1");
  CHECK(e1.grid.boundary == Boundary::Periodic);
  CHECK(e1.grid.dim == 2);
  CHECK(e1.grid.make().spacing() == doctest::Approx(1.0 / 16.0));
  CHECK(e1.K == 1);
  CHECK(e1.integrator.steps == 160);
  CHECK(e1.shooting.frozen_jacobian);

  const RunConfig e2 = example_config("ex2");
  CHECK(e2.grid.make().spacing() == doctest::Approx(3e-2));
  CHECK(e2.grid.lower == -0.5);
  CHECK(e2.grid.upper == 2.5);
  CHECK(e2.K == 60);

  const RunConfig e3 = example_config("ex3");
  CHECK(e3.grid.make().spacing() == doctest::Approx(5e-2));
  CHECK(e3.K == 60);
  CHECK(e3.integrator.steps == 20);

  CHECK(example_config("ex5").shooting.barrier == 1e-5);
  CHECK(example_config("ex10").shooting.barrier == 1e-3);
  CHECK_FALSE(example_config("ex6").shooting.barrier.has_value());
  CHECK(std::holds_alternative<PolynomialSpec>(example_config("ex9").mu.shape));
  CHECK(std::holds_alternative<LaplaceSpec>(example_config("ex9").nu.shape));
}

TEST_CASE("node velocity and the ex1 error norms") {
  const LatticeGrid g(2, 2, 0.0, 1.0);  // dx = 1/2, NoFlux
  Vec S(9);
  S << 0, 1, 2, 0, 1, 2, 0, 1, 2;  // S = 2 x2, x2 is the fast axis
  const Eigen::MatrixXd v = node_velocity(g, S);
  CHECK(v.col(1).head(2) == Eigen::Vector2d(2.0, 2.0));
  CHECK(v(2, 1) == 0.0);  // no edge past the boundary
  CHECK(v.col(0).lpNorm<Eigen::Infinity>() == 0.0);

  const LatticeGrid t(2, 2, 0.0, 1.0, Boundary::Periodic);
  CHECK(node_velocity(t, S)(2, 1) == -4.0);  // wraps back to x2 = 0

  // Zero potential: the error is the reference velocity itself, whose
  // largest node value is 2 pi beta (at x = (0, 1/4)).
  const double beta = 1.0 / (256.0 * M_PI * M_PI);
  const LatticeGrid e(2, 16, 0.0, 1.0, Boundary::Periodic);
  const VelocityError err = ex1_velocity_error(e, Vec::Zero(static_cast<Eigen::Index>(e.node_count())), beta);
  CHECK(err.max_error == doctest::Approx(2.0 * M_PI * beta).epsilon(1e-12));
  const Eigen::MatrixXd ref = reference_velocity_ex1(e, beta);
  CHECK(err.l2_error == doctest::Approx(std::sqrt(ref.squaredNorm() * e.cell_volume())).epsilon(1e-14));
  CHECK(ref == -exact_initial_velocity_ex1(e, beta));
}

TEST_CASE("a density touching zero mid-path stalls instead of looping") {
  // dx = 1/2 is too coarse for ex7: near lambda 0.27 a breakpoint density hits
  // zero, and with no barrier every smaller step fails too.
  RunConfig cfg = example_config("ex7");
  cfg.grid.n = 8;
  cfg.K = 5;
  cfg.integrator.steps = 20;
  try {
    execute(cfg);
    FAIL("expected ContinuationStalled");
  } catch (const ContinuationStalled& e) {
    CHECK(e.last_lambda() > 0.2);
    CHECK(e.last_lambda() < 0.3);
  }
}
