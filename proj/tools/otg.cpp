#include <optional>
#include <string>

#include "CLI11.hpp"
#include "otg/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein geodesics on lattices by multiple shooting"};
  app.require_subcommand(1);

  std::string config;
  std::string name;
  std::string out;
  bool full = false;

  auto* solve = app.add_subcommand("solve", "solve the problem described by a JSON config");
  solve->add_option("--config", config, "config file")->required();
  solve->add_option("--out", out, "output directory (overrides the config)");

  auto* example = app.add_subcommand("example", "run a registered example (ex1..ex10)");
  example->add_option("name", name, "example name")->required();
  example->add_option("--out", out, "output directory");

  auto* convergence = app.add_subcommand("convergence", "velocity error of ex1 under grid refinement");
  convergence->add_flag("--full", full, "also run dx = 1/64 and 1/128");
  convergence->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  const std::optional<std::string> out_dir = out.empty() ? std::nullopt : std::optional<std::string>(out);
  if (*solve) return otg::cli::cmd_solve(config, out_dir);
  if (*example) return otg::cli::cmd_example(name, out_dir);
  return otg::cli::cmd_convergence(full, out_dir);
}
