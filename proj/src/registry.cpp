#include <numbers>

#include "otg/cli.hpp"
#include "otg/errors.hpp"

namespace otg::cli {

namespace {

RunConfig base(const std::string& name, int dim, int n, double lower, double upper, int K, int steps) {
  RunConfig c;
  c.name = name;
  c.grid = GridConfig{dim, n, lower, upper, Boundary::NoFlux};
  c.K = K;
  c.integrator.steps = steps;
  c.out_dir = "out/" + name;
  return c;
}

DensitySpec gauss(std::vector<double> rates, std::vector<double> centers, double shift) {
  return DensitySpec{GaussianSpec{std::move(rates), std::move(centers)}, shift};
}

DensitySpec laplace(std::vector<double> rates, std::vector<double> centers, double shift) {
  return DensitySpec{LaplaceSpec{std::move(rates), std::move(centers)}, shift};
}

// 2D parameters are listed per axis as (x1, x2): rates (c, a), centers (d, b).
RunConfig build(const std::string& name) {
  if (name == "ex1") return ex1_config(16);
  if (name == "ex2") {
    auto c = base(name, 1, 100, -0.5, 2.5, 60, 300);
    c.mu = gauss({15.0}, {0.4}, 1e-4);
    c.nu = gauss({15.0}, {1.4}, 1e-4);
    c.homotopy = HomotopyKind::GaussianPath;
    return c;
  }
  if (name == "ex3") {
    auto c = base(name, 1, 40, 0.0, 2.0, 60, 20);
    c.mu = DensitySpec{UniformSpec{}, 0.0};
    c.nu = gauss({25.0}, {1.0}, 0.0);
    return c;
  }
  if (name == "ex4") {
    auto c = base(name, 1, 75, -0.5, 2.5, 80, 200);
    c.mu = gauss({50.0}, {0.4}, 1e-4);
    c.nu = gauss({50.0}, {1.4}, 1e-4);
    c.homotopy = HomotopyKind::GaussianPath;
    return c;
  }
  if (name == "ex5") {
    auto c = base(name, 2, 25, -1.0, 4.0, 10, 30);
    c.mu = gauss({5.0, 5.0}, {1.5, 0.5}, 0.01);
    c.nu = DensitySpec{GaussianMixtureSpec{{GaussianBump{{5.0, 5.0}, {2.45, 2.45}, 1.0},
                                            GaussianBump{{5.0, 5.0}, {0.55, 2.45}, 1.0}}},
                       0.01};
    c.homotopy = HomotopyKind::GaussianPath;
    c.shooting.barrier = 1e-5;
    return c;
  }
  if (name == "ex6") {
    auto c = base(name, 2, 20, -1.0, 3.0, 10, 30);
    c.mu = gauss({5.0, 2.5}, {0.3, 0.5}, 0.001);
    c.nu = gauss({10.0, 5.0}, {1.3, 1.5}, 0.001);
    c.homotopy = HomotopyKind::GaussianPath;
    return c;
  }
  if (name == "ex7") {
    auto c = base(name, 2, 20, -1.0, 3.0, 10, 30);
    c.mu = laplace({5.0, 5.0}, {0.6, 0.5}, 0.001);
    c.nu = laplace({5.0, 5.0}, {1.6, 1.5}, 0.001);
    return c;
  }
  if (name == "ex8") {
    auto c = base(name, 2, 20, -1.0, 3.0, 10, 30);
    c.mu = DensitySpec{UniformSpec{}, 0.0};
    c.nu = laplace({10.0, 10.0}, {1.6, 1.5}, 0.01);
    c.snapshot_times = {0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
    return c;
  }
  if (name == "ex9") {
    auto c = base(name, 2, 20, -1.0, 3.0, 10, 30);
    c.mu = DensitySpec{PolynomialSpec{-1.0, 3.0}, 0.0};
    c.nu = laplace({10.0, 10.0}, {1.6, 1.5}, 0.01);
    return c;
  }
  if (name == "ex10") {
    auto c = base(name, 2, 20, -1.0, 3.0, 10, 30);
    c.mu = gauss({50.0, 50.0}, {0.3, 0.5}, 0.001);
    c.nu = gauss({50.0, 50.0}, {1.3, 1.5}, 0.001);
    c.homotopy = HomotopyKind::GaussianPath;
    c.shooting.barrier = 1e-3;
    return c;
  }
  throw UnknownExample("unknown example '" + name + "' (expected ex1..ex10)");
}

}  // namespace

const std::vector<std::string>& example_names() {
  static const std::vector<std::string> names{"ex1", "ex2", "ex3", "ex4", "ex5", "ex6", "ex7", "ex8", "ex9", "ex10"};
  return names;
}

RunConfig ex1_config(int n) {
  auto c = base("ex1", 2, n, 0.0, 1.0, 1, 160);
  c.grid.boundary = Boundary::Periodic;
  c.mu = DensitySpec{MongeAmpereSpec{1.0 / (256.0 * std::numbers::pi * std::numbers::pi)}, 0.0};
  c.nu = DensitySpec{UniformSpec{}, 0.0};
  c.shooting.frozen_jacobian = true;
  return c;
}

RunConfig example_config(const std::string& name) { return build(name); }

}  // namespace otg::cli
