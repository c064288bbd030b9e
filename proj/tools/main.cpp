#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int jobs = 1;
};

CLI::App* add_command(CLI::App& app, const char* name, const char* help, Flags& flags, bool out_is_file) {
  auto* sub = app.add_subcommand(name, help);
  sub->add_option("--config,-c", flags.config, out_is_file ? "Scenario spec (JSON)" : "Run config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", flags.seed, "Override the seed from the config");
  sub->add_option("--out,-o", flags.out, out_is_file ? "Output dataset path" : "Output directory");
  sub->add_option("--jobs,-j", flags.jobs, "Worker threads")->check(CLI::PositiveNumber);
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal fairness audit of observational outcome data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fairaudit " FAIRAUDIT_CLI_VERSION);

  Flags flags;
  auto* audit = add_command(app, "audit", "Run the estimator battery and write verdicts", flags, false);
  auto* diagnose = add_command(app, "diagnose", "Balance diagnostics before and after adjustment", flags, false);
  auto* sensitivity = add_command(app, "sensitivity", "Unobserved-confounding sensitivity curves", flags, false);
  auto* match = add_command(app, "match", "Write matched weighted samples", flags, false);
  auto* simulate = add_command(app, "simulate", "Generate a synthetic dataset", flags, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // CLI11 reports usage problems with its own codes; fold them into the
    // config-error status.
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  fairaudit::cli::RunOptions options;
  options.config = flags.config;
  auto* chosen = app.get_subcommands().front();
  if (chosen->count("--seed")) options.seed = flags.seed;
  if (chosen->count("--out")) options.out = flags.out;
  if (chosen->count("--jobs")) options.jobs = flags.jobs;

  if (chosen == audit) return fairaudit::cli::cmd_audit(options, std::cout, std::cerr);
  if (chosen == diagnose) return fairaudit::cli::cmd_diagnose(options, std::cout, std::cerr);
  if (chosen == sensitivity) return fairaudit::cli::cmd_sensitivity(options, std::cout, std::cerr);
  if (chosen == match) return fairaudit::cli::cmd_match(options, std::cout, std::cerr);
  return fairaudit::cli::cmd_simulate(options, std::cout, std::cerr);
}
