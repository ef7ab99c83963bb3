#include <iostream>

#include <CLI11.hpp>

#include "tbs/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Transform-both-sides Bayesian variable selection"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, model, preset;
  std::optional<int> replications;

  for (const char* name : {"fit", "simulate", "consistency", "baseline"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run configuration")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out", out, "output folder");
    sub->add_option("--model", model, "tbs|tbso|tbst|tbss|tbscn");
    sub->add_option("--preset", preset, "simulation scenario id");
    sub->add_option("--replications", replications);
  }
  CLI11_PARSE(app, argc, argv);

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    tbs::cli::Overrides ov{seed, out, model, preset, replications};
    const auto rc = tbs::cli::load_config(tbs::cli::parse_command(name),
                                          config_path, ov);
    return tbs::cli::run(rc, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "tbs " << name << ": " << e.what() << "\n";
    return tbs::cli::kExitError;
  }
}
