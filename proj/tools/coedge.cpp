// Command-line front end: planning, simulation, and the experiment sweeps.

#include <CLI11.hpp>

#include "coedge/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"CoEdge cooperative CNN inference planner and simulator"};
  app.require_subcommand(1);

  coedge::cli::RunConfig config;

  auto add_common = [&](CLI::App* cmd, bool needs_model = true) {
    if (needs_model) {
      cmd->add_option("--model", config.model_path, "model descriptor file")
          ->required();
      cmd->add_option("--cluster", config.cluster_path, "cluster file")
          ->required();
      cmd->add_option("--scenario", config.scenario_path,
                      "scenario settings file");
      cmd->add_option("--deadline-ms", config.deadline_ms,
                      "execution deadline in milliseconds");
      cmd->add_option("--prefix", config.prefix,
                      "use only the first k devices of the cluster");
    }
    cmd->add_option("--out", config.out_path, "output file (default stdout)");
    cmd->add_option("--planner", config.planner,
                    "coedge | modnn | musical_chair | local | all");
    cmd->add_option("--seed", config.seed, "seed for randomized commands");
    return cmd;
  };

  CLI::App* plan = add_common(app.add_subcommand(
      "plan", "compute a workload partition plan"));
  CLI::App* simulate = add_common(app.add_subcommand(
      "simulate", "plan and replay one cooperative inference"));
  CLI::App* sweep_ratio = add_common(app.add_subcommand(
      "sweep-ratio", "two-device offloading-ratio sweep"));
  sweep_ratio->add_option("--steps", config.steps,
                          "number of ratio sample points");
  CLI::App* sweep_deadline = add_common(app.add_subcommand(
      "sweep-deadline", "energy as a function of the deadline"));
  sweep_deadline->add_option("--deadlines-ms", config.deadlines_ms,
                             "comma-separated deadline grid")
      ->delimiter(',');
  CLI::App* epochs = add_common(app.add_subcommand(
      "epochs", "bandwidth-fluctuation replay with per-epoch replanning"));
  CLI::App* fuzz = add_common(
      app.add_subcommand("fuzz", "randomized simulator self-check"), false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed()) return coedge::cli::cmd_plan(config);
    if (simulate->parsed()) return coedge::cli::cmd_simulate(config);
    if (sweep_ratio->parsed()) return coedge::cli::cmd_sweep_ratio(config);
    if (sweep_deadline->parsed()) return coedge::cli::cmd_sweep_deadline(config);
    if (epochs->parsed()) return coedge::cli::cmd_epochs(config);
    if (fuzz->parsed()) return coedge::cli::cmd_fuzz(config);
  } catch (const coedge::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
