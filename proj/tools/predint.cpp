// predint: fit models, compute prediction bounds and run coverage studies
// from a JSON config.
//
//   predint fit      --config cfg.json [--out file] [--format csv|json]
//   predint predict  --config cfg.json [--seed N] [--out file] [--format csv|json]
//   predint coverage --config cfg.json [--seed N] [--out file] [--format csv|json]
//
// PREDINT_THREADS caps worker threads (0 = all cores).

#include <iostream>

#include <CLI11.hpp>

#include "predint/cli.hpp"

int main(int argc, char** argv) {
  using namespace predint::cli;
  CLI::App app{"Prediction intervals: fitting, bounds and coverage studies"};
  app.require_subcommand(1);

  Invocation inv;
  std::uint64_t seed = 0;
  for (const char* verb : {"fit", "predict", "coverage"}) {
    auto* sub = app.add_subcommand(verb, std::string("run the ") + verb + " task");
    sub->add_option("--config", inv.config_path, "JSON config file")->required();
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", inv.out_path, "output file (default: stdout)");
    sub->add_option("--format", inv.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  auto* sub = app.get_subcommands().front();
  inv.verb = parse_task(sub->get_name());
  if (sub->count("--seed") > 0) inv.seed = seed;
  return execute(inv, std::cout, std::cerr);
}
