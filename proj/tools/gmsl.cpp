#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gmsl/pipeline.hpp"
#include "gmsl/version.hpp"

namespace {

void add_common(CLI::App* cmd, gmsl::CliOptions& opts, bool takes_input) {
  cmd->add_option("--config", opts.config_path, "key-value config file");
  cmd->add_option("--out", opts.out_dir, "output directory (created if missing)");
  cmd->add_option("--im", opts.im, "target intensity measure: pga or pgv");
  if (takes_input) cmd->add_option("--in", opts.in_path, "input flatfile CSV");
}

void add_model_source(CLI::App* cmd, gmsl::CliOptions& opts) {
  cmd->add_option("--model", opts.model_path, "fitted model JSON");
  cmd->add_flag("--builtin", opts.use_builtin, "use the published reference model");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(gmsl::kToolName) + " " + gmsl::kVersion +
               ": sparse ground-motion equation discovery"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(gmsl::kVersion));

  gmsl::CliOptions opts;

  auto* ingest = app.add_subcommand("ingest", "parse, filter, and summarize a flatfile");
  add_common(ingest, opts, true);

  auto* fit = app.add_subcommand("fit", "fit a sparse equation (sweep unless --delta)");
  add_common(fit, opts, true);
  fit->add_option("--delta", opts.delta, "explicit threshold; skips the sweep");

  auto* sweep = app.add_subcommand("sweep", "run the threshold sweep and mark the knee");
  add_common(sweep, opts, true);

  auto* residuals = app.add_subcommand("residuals", "mixed-effects residual decomposition");
  add_common(residuals, opts, true);
  add_model_source(residuals, opts);

  auto* curves = app.add_subcommand("curves", "attenuation curves over a scenario grid");
  add_common(curves, opts, false);
  add_model_source(curves, opts);
  curves->add_option("--compare", opts.compare_path, "comparison CSV appended as labeled series");

  auto* extrapolate =
      app.add_subcommand("extrapolate", "near-field stress test: full vs far-field fit");
  add_common(extrapolate, opts, true);
  extrapolate->add_option("--delta", opts.delta, "explicit threshold; skips the sweep");
  extrapolate->add_option("--split-km", opts.split_km, "far-field training cut (default 30)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic flatfile");
  add_common(synth, opts, false);
  synth->add_option("--seed", opts.seed, "RNG seed");
  synth->add_option("--events", opts.events, "number of events");
  synth->add_option("--records-per-event", opts.records_per_event, "records per event");
  synth->add_option("--tau", opts.tau, "between-event standard deviation");
  synth->add_option("--phi", opts.phi, "within-event standard deviation");

  CLI11_PARSE(app, argc, argv);
  opts.subcommand = app.get_subcommands().front()->get_name();

  try {
    return gmsl::run_command(opts, std::cout);
  } catch (const gmsl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return gmsl::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
