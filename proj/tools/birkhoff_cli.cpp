// Command-line front end: birkhoff <command> --config <file> [options]
#include <iostream>

#include "CLI11.hpp"
#include "birkhoff/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multifractal analysis of piecewise monotone interval maps"};
  app.require_subcommand(1, 1);
  birkhoff::CliOptions opt;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", opt.config_path, "YAML run configuration");
    if (config_required) c->required();
    sub->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", opt.seed, "seed for sampling");
    sub->add_option("--grid", opt.grid, "number of a-grid points")->check(CLI::PositiveNumber);
    sub->add_option("--tol-delta", opt.tol_delta, "bisection tolerance on delta");
    sub->add_option("--tol-q", opt.tol_q, "minimization tolerance in q");
  };
  struct Entry {
    const char* name;
    const char* help;
  };
  for (auto [name, help] : {Entry{"pressure", "tilted pressure table (pressure.csv)"},
                            Entry{"spectrum", "dimension spectrum (spectrum.csv)"},
                            Entry{"hypdim", "hyperbolic dimension per system (hypdim.csv)"},
                            Entry{"oracle", "brute-force constrained maximum vs solver (oracle.csv)"},
                            Entry{"moran", "Moran construction (moran_tree.json, samples.csv)"}}) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, true);
    sub->callback([&opt, n = std::string(name)] { opt.command = n; });
  }
  auto* check = app.add_subcommand("check", "unimodality and semicontinuity (report.txt)");
  add_common(check, false);
  check->add_option("--input", opt.input, "spectrum.csv to check instead of computing one");
  check->add_option("--refined", opt.refined, "finer spectrum.csv for the semicontinuity test");
  check->callback([&opt] { opt.command = "check"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : birkhoff::kExitValidation;
  }
  return birkhoff::run(opt, std::cerr);
}
