#include "nsch/app.hpp"
#include "nsch/config.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Navier-Stokes-Cahn-Hilliard channel simulator with dynamic boundary conditions"};
  app.require_subcommand(1);

  nsch::RunOptions opts;
  std::string run_path, verify_path, output_dir;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "run a simulation and write diagnostics and snapshots");
  run->add_option("config", run_path, "configuration file")->required();
  run->add_flag("--strict", opts.strict, "exit with status 2 when an audit fails");
  auto* dir_opt = run->add_option("--output-dir", output_dir, "override output.directory");
  auto* seed_opt = run->add_option("--seed", seed, "override the spinodal seed");

  auto* verify = app.add_subcommand("verify", "run the verification checks");
  verify->add_option("config", verify_path, "configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  nsch::RunConfig cfg;
  try {
    cfg = nsch::load_config(run->parsed() ? run_path : verify_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  if (run->parsed()) {
    if (*dir_opt) opts.output_dir = output_dir;
    if (*seed_opt) opts.seed = seed;
    return nsch::run_command(cfg, opts, std::cout, std::cerr);
  }
  return nsch::verify_command(cfg, std::cout, std::cerr);
}
