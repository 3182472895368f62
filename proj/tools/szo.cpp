#include <iostream>

#include "CLI11.hpp"
#include "szo/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace szo::cli;

  CLI::App app{"Sparse zeroth-order optimization experiments"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  RunOptions run_opts;
  std::uint64_t seed = 0;
  std::string out;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", run_opts.config_path, "Config file (key = value)");
    sub->add_option("--seed", seed, "Run a single seed instead of the configured list");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--set", run_opts.overrides, "Override a config key (key=value)");
  };

  auto* run = app.add_subcommand("run", "Run one experiment per configured seed");
  add_common(run);

  auto* compare = app.add_subcommand("compare", "Run several variants on shared seeds");
  add_common(compare);
  compare->add_option("--variants", run_opts.variants,
                      "Variants to compare (dense, freezeL1, freezeRandom, pruneL1, "
                      "pruneRandom)")
      ->delimiter(',');

  TheoryOptions theory;
  auto* verify = app.add_subcommand("verify-theory", "Monte-Carlo checks of the bounds");
  verify->add_option("--samples", theory.samples, "Monte-Carlo samples per cell");
  verify->add_option("--seed", theory.seed, "Seed for the checks");
  verify->add_option("--out", theory.out, "Directory for theory_report.csv");
  verify->add_flag("--show-counterexample", theory.show_counterexample,
                   "Add the misaligned-mask case (reported, not counted)");

  PlotOptions plot;
  auto* plot_cmd = app.add_subcommand("plot", "Line chart of CSV columns as SVG");
  plot_cmd->add_option("csv", plot.csv, "Input CSV")->required();
  plot_cmd->add_option("--columns", plot.columns, "Columns to plot")
      ->delimiter(',')
      ->required();
  plot_cmd->add_option("--out", plot.out, "Output SVG path");
  plot_cmd->add_flag("--sparsity-axis", plot.sparsity_axis,
                     "Label the top axis with sparsity");
  plot_cmd->add_option("--sparsity-column", plot.sparsity_column,
                       "Column used for the top axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (run->parsed() || compare->parsed()) {
    auto* sub = run->parsed() ? run : compare;
    if (sub->count("--seed") > 0) run_opts.seed = seed;
    if (sub->count("--out") > 0) run_opts.out = out;
    return run->parsed() ? cmd_run(run_opts) : cmd_compare(run_opts);
  }
  if (verify->parsed()) return cmd_verify_theory(theory);
  return cmd_plot(plot);
}
