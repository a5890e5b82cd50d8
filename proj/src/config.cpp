#include <cmath>
#include <fstream>
#include <set>

#include "otg/cli.hpp"
#include "otg/errors.hpp"

namespace otg::cli {

using nlohmann::json;

namespace {

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
T get(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const std::string& where, const char* key, T fallback) {
  return j.contains(key) ? get<T>(j, where, key) : fallback;
}

GridConfig parse_grid(const json& j) {
  allow_keys(j, "grid", {"dim", "n", "dx", "lower", "upper", "boundary"});
  GridConfig g;
  g.dim = get<int>(j, "grid", "dim");
  g.lower = get<double>(j, "grid", "lower");
  g.upper = get<double>(j, "grid", "upper");
  if (j.contains("n") == j.contains("dx")) throw ConfigError("grid: give exactly one of 'n' and 'dx'");
  if (j.contains("n")) {
    g.n = get<int>(j, "grid", "n");
  } else {
    const double dx = get<double>(j, "grid", "dx");
    if (!(dx > 0.0)) throw ConfigError("grid.dx must be > 0");
    const double cells = (g.upper - g.lower) / dx;
    g.n = static_cast<int>(std::lround(cells));
    if (std::abs(cells - g.n) > 1e-9 * std::max(1.0, cells)) {
      throw ConfigError("grid.dx does not divide the interval into whole cells");
    }
  }
  const auto b = get_or<std::string>(j, "grid", "boundary", "noflux");
  if (b == "noflux") {
    g.boundary = Boundary::NoFlux;
  } else if (b == "periodic") {
    g.boundary = Boundary::Periodic;
  } else {
    throw ConfigError("grid.boundary must be 'noflux' or 'periodic'");
  }
  return g;
}

DensitySpec parse_density(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const auto type = get<std::string>(j, where, "type");
  DensitySpec spec;
  if (type == "gaussian" || type == "laplace") {
    allow_keys(j, where, {"type", "rates", "centers", "shift"});
    auto rates = get<std::vector<double>>(j, where, "rates");
    auto centers = get<std::vector<double>>(j, where, "centers");
    if (type == "gaussian") {
      spec.shape = GaussianSpec{rates, centers};
    } else {
      spec.shape = LaplaceSpec{rates, centers};
    }
  } else if (type == "gaussian_mixture") {
    allow_keys(j, where, {"type", "bumps", "shift"});
    GaussianMixtureSpec mix;
    const auto& bumps = j.at("bumps");
    if (!bumps.is_array()) throw ConfigError(where + ".bumps: expected an array");
    for (const auto& b : bumps) {
      allow_keys(b, where + ".bumps[]", {"rates", "centers", "weight"});
      mix.bumps.push_back(GaussianBump{get<std::vector<double>>(b, where, "rates"),
                                       get<std::vector<double>>(b, where, "centers"),
                                       get_or<double>(b, where, "weight", 1.0)});
    }
    spec.shape = mix;
  } else if (type == "uniform") {
    allow_keys(j, where, {"type", "shift"});
    spec.shape = UniformSpec{};
  } else if (type == "polynomial") {
    allow_keys(j, where, {"type", "roots", "shift"});
    const auto roots = get_or<std::vector<double>>(j, where, "roots", {-1.0, 3.0});
    if (roots.size() != 2) throw ConfigError(where + ".roots: expected two values");
    spec.shape = PolynomialSpec{roots[0], roots[1]};
  } else if (type == "monge_ampere") {
    allow_keys(j, where, {"type", "beta", "shift"});
    spec.shape = MongeAmpereSpec{get<double>(j, where, "beta")};
  } else if (type == "custom") {
    allow_keys(j, where, {"type", "values", "shift"});
    spec.shape = CustomSpec{get<std::vector<double>>(j, where, "values")};
  } else {
    throw ConfigError(where + ".type: unknown density type '" + type + "'");
  }
  spec.shift = get_or<double>(j, where, "shift", 0.0);
  return spec;
}

json density_json(const DensitySpec& spec) {
  json j = std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSpec>) return {{"type", "gaussian"}, {"rates", s.rates}, {"centers", s.centers}};
        if constexpr (std::is_same_v<T, LaplaceSpec>) return {{"type", "laplace"}, {"rates", s.rates}, {"centers", s.centers}};
        if constexpr (std::is_same_v<T, GaussianMixtureSpec>) {
          json bumps = json::array();
          for (const auto& b : s.bumps) bumps.push_back({{"rates", b.rates}, {"centers", b.centers}, {"weight", b.weight}});
          return {{"type", "gaussian_mixture"}, {"bumps", bumps}};
        }
        if constexpr (std::is_same_v<T, UniformSpec>) return {{"type", "uniform"}};
        if constexpr (std::is_same_v<T, PolynomialSpec>) return {{"type", "polynomial"}, {"roots", {s.root_lo, s.root_hi}}};
        if constexpr (std::is_same_v<T, MongeAmpereSpec>) return {{"type", "monge_ampere"}, {"beta", s.beta}};
        if constexpr (std::is_same_v<T, CustomSpec>) return {{"type", "custom"}, {"values", s.values}};
      },
      spec.shape);
  j["shift"] = spec.shift;
  return j;
}

}  // namespace

RunConfig parse_config(const json& j) {
  allow_keys(j, "config",
             {"name", "grid", "mu", "nu", "homotopy", "K", "integrator", "shooting", "continuation", "output"});
  RunConfig cfg;
  cfg.name = get_or<std::string>(j, "config", "name", "run");
  if (!j.contains("grid")) throw ConfigError("config: missing 'grid'");
  cfg.grid = parse_grid(j.at("grid"));
  if (!j.contains("mu") || !j.contains("nu")) throw ConfigError("config: 'mu' and 'nu' are required");
  cfg.mu = parse_density(j.at("mu"), "mu");
  cfg.nu = parse_density(j.at("nu"), "nu");

  const auto kind = get_or<std::string>(j, "config", "homotopy", "linear");
  if (kind == "linear") {
    cfg.homotopy = HomotopyKind::LinearPath;
  } else if (kind == "gaussian") {
    cfg.homotopy = HomotopyKind::GaussianPath;
  } else {
    throw ConfigError("homotopy must be 'linear' or 'gaussian'");
  }
  cfg.K = get_or<int>(j, "config", "K", 1);
  if (cfg.K < 1) throw ConfigError("K must be >= 1");

  if (j.contains("integrator")) {
    const auto& ji = j.at("integrator");
    allow_keys(ji, "integrator", {"scheme", "steps", "blowup_threshold"});
    const auto scheme = get_or<std::string>(ji, "integrator", "scheme", "symplectic_euler");
    if (scheme == "symplectic_euler") {
      cfg.integrator.scheme = Scheme::SymplecticEuler;
    } else if (scheme == "rk4") {
      cfg.integrator.scheme = Scheme::ExplicitRK4;
    } else {
      throw ConfigError("integrator.scheme must be 'symplectic_euler' or 'rk4'");
    }
    cfg.integrator.steps = get_or<int>(ji, "integrator", "steps", cfg.integrator.steps);
    cfg.integrator.blowup_threshold = get_or<double>(ji, "integrator", "blowup_threshold", cfg.integrator.blowup_threshold);
  }
  if (j.contains("shooting")) {
    const auto& js = j.at("shooting");
    allow_keys(js, "shooting", {"max_iters", "rel_stop", "abs_stop", "fd_rel", "fd_floor", "barrier",
                                "frozen_jacobian", "success_tol", "threads"});
    auto& s = cfg.shooting;
    s.max_iters = get_or<int>(js, "shooting", "max_iters", s.max_iters);
    s.rel_stop = get_or<double>(js, "shooting", "rel_stop", s.rel_stop);
    s.abs_stop = get_or<double>(js, "shooting", "abs_stop", s.abs_stop);
    s.fd_rel = get_or<double>(js, "shooting", "fd_rel", s.fd_rel);
    s.fd_floor = get_or<double>(js, "shooting", "fd_floor", s.fd_floor);
    if (js.contains("barrier") && !js.at("barrier").is_null()) s.barrier = get<double>(js, "shooting", "barrier");
    s.frozen_jacobian = get_or<bool>(js, "shooting", "frozen_jacobian", s.frozen_jacobian);
    s.success_tol = get_or<double>(js, "shooting", "success_tol", s.success_tol);
    s.threads = get_or<int>(js, "shooting", "threads", s.threads);
  }
  if (j.contains("continuation")) {
    const auto& jc = j.at("continuation");
    allow_keys(jc, "continuation", {"lambda0", "L", "max_shrinks", "try_direct_first"});
    auto& c = cfg.continuation;
    c.lambda0 = get_or<double>(jc, "continuation", "lambda0", c.lambda0);
    c.L = get_or<int>(jc, "continuation", "L", c.L);
    c.max_shrinks = get_or<int>(jc, "continuation", "max_shrinks", c.max_shrinks);
    c.try_direct_first = get_or<bool>(jc, "continuation", "try_direct_first", c.try_direct_first);
  }
  if (j.contains("output")) {
    const auto& jo = j.at("output");
    allow_keys(jo, "output", {"directory", "snapshot_times"});
    cfg.out_dir = get_or<std::string>(jo, "output", "directory", cfg.out_dir);
    cfg.snapshot_times = get_or<std::vector<double>>(jo, "output", "snapshot_times", cfg.snapshot_times);
  }

  // Everything below throws library errors; surface them as config errors.
  try {
    cfg.integrator.validate();
    cfg.shooting.validate();
    cfg.continuation.validate();
    const LatticeGrid grid = cfg.grid.make();
    realize(cfg.mu, grid);
    realize(cfg.nu, grid);
    if (cfg.homotopy == HomotopyKind::GaussianPath) homotopy(cfg.mu, cfg.nu, 0.5, cfg.homotopy, grid);
    for (double t : cfg.snapshot_times) {
      if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("snapshot times must lie in [0, 1]");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& cfg) {
  const auto& s = cfg.shooting;
  json j = {
      {"name", cfg.name},
      {"grid",
       {{"dim", cfg.grid.dim},
        {"n", cfg.grid.n},
        {"lower", cfg.grid.lower},
        {"upper", cfg.grid.upper},
        {"boundary", cfg.grid.boundary == Boundary::Periodic ? "periodic" : "noflux"}}},
      {"mu", density_json(cfg.mu)},
      {"nu", density_json(cfg.nu)},
      {"homotopy", cfg.homotopy == HomotopyKind::GaussianPath ? "gaussian" : "linear"},
      {"K", cfg.K},
      {"integrator",
       {{"scheme", cfg.integrator.scheme == Scheme::SymplecticEuler ? "symplectic_euler" : "rk4"},
        {"steps", cfg.integrator.steps},
        {"blowup_threshold", cfg.integrator.blowup_threshold}}},
      {"shooting",
       {{"max_iters", s.max_iters},
        {"rel_stop", s.rel_stop},
        {"abs_stop", s.abs_stop},
        {"fd_rel", s.fd_rel},
        {"fd_floor", s.fd_floor},
        {"barrier", s.barrier ? json(*s.barrier) : json(nullptr)},
        {"frozen_jacobian", s.frozen_jacobian},
        {"success_tol", s.success_tol},
        {"threads", s.threads}}},
      {"continuation",
       {{"lambda0", cfg.continuation.lambda0},
        {"L", cfg.continuation.L},
        {"max_shrinks", cfg.continuation.max_shrinks},
        {"try_direct_first", cfg.continuation.try_direct_first}}},
      {"output", {{"directory", cfg.out_dir}, {"snapshot_times", cfg.snapshot_times}}}};
  return j;
}

}  // namespace otg::cli
