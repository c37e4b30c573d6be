#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "crowdnav/errors.hpp"

using namespace crowdnav::cli;

namespace {

void add_scenario_flags(CLI::App* cmd, ScenarioArgs& s) {
  cmd->add_option("--scenario", s.scenario, "Scenario JSON file (defaults to the preset)");
  cmd->add_option("--preset", s.preset, "Built-in scenario when --scenario is absent")
      ->check(CLI::IsMember({"desk", "default"}));
  cmd->add_option("--ood", s.ood, "Out-of-distribution variant")
      ->check(CLI::IsMember({"rushing", "sf", "groups"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crowdnav: crowd navigation with conformal uncertainty and constrained RL"};
  app.require_subcommand(1);
  const std::vector<std::string> args(argv, argv + argc);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Roll a policy in a scenario and write a JSONL trace");
  add_scenario_flags(simulate, sim.scenario);
  simulate->add_option("--policy", sim.policy, "mpc | orca | sf | zero | checkpoint:<path>");
  simulate->add_option("--episodes", sim.episodes, "Number of episodes")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Seed")->envname("CROWDNAV_SEED");
  simulate->add_option("--out", sim.out, "Output directory")->envname("CROWDNAV_OUT");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "PPO-Lagrangian training");
  add_scenario_flags(train, tr.scenario);
  train->add_option("--config", tr.trainer_config, "Trainer JSON overrides");
  train->add_option("--cost-limit", tr.cost_limit, "Cost limit")->check(CLI::NonNegativeNumber);
  train->add_option("--steps", tr.steps, "Environment steps")->check(CLI::PositiveNumber);
  train->add_option("--envs", tr.envs, "Parallel environments")->check(CLI::PositiveNumber);
  train->add_option("--lr", tr.lr, "Actor/reward-critic learning rate (cost critic gets half)")
      ->check(CLI::PositiveNumber);
  train->add_option("--threads", tr.threads, "Rollout worker threads")->check(CLI::PositiveNumber);
  train->add_flag("--freeze-lambda", tr.freeze_lambda, "Keep lambda at its initial value");
  train->add_flag("--no-uncertainty", tr.no_uncertainty, "Zero the uncertainty inputs");
  train->add_option("--seed", tr.seed, "Seed")->envname("CROWDNAV_SEED");
  train->add_option("--out", tr.out, "Output directory")->envname("CROWDNAV_OUT");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Metrics campaign over test seeds and variants");
  add_scenario_flags(evaluate, ev.scenario);
  evaluate->add_option("--policy", ev.policies,
                       "mpc | orca | sf | zero | checkpoint:<path>; repeat checkpoints for training seeds");
  evaluate->add_option("--variants", ev.variants, "Extra OOD variants to evaluate")
      ->check(CLI::IsMember({"rushing", "sf", "groups"}));
  evaluate->add_option("--episodes", ev.episodes, "Episodes per test seed")->check(CLI::PositiveNumber);
  evaluate->add_option("--seeds", ev.seeds, "Number of test seeds")->check(CLI::PositiveNumber);
  evaluate->add_option("--danger-window", ev.danger_window, "ITR lookahead (steps)")
      ->check(CLI::NonNegativeNumber);
  evaluate->add_option("--out", ev.out, "Output directory")->envname("CROWDNAV_OUT");

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Replay a trace through CV + DtACI; per-horizon coverage CSV");
  calibrate->add_option("--trace", cal.trace, "JSONL trace")->required();
  calibrate->add_option("--alpha", cal.alpha, "Miscoverage level")->check(CLI::Range(0.0, 1.0));
  calibrate->add_option("--horizon", cal.horizon, "Prediction horizon K")->check(CLI::PositiveNumber);
  calibrate->add_option("--seed", cal.seed, "Query sampling seed")->envname("CROWDNAV_SEED");
  calibrate->add_option("--out", cal.out, "Coverage CSV path");

  RenderArgs ren;
  auto* render = app.add_subcommand("render", "Trace to one SVG per step");
  render->add_option("--trace", ren.trace, "JSONL trace")->required();
  render->add_option("--episode", ren.episode, "Episode index in the trace")->check(CLI::NonNegativeNumber);
  render->add_option("--out", ren.out, "Frame directory")->envname("CROWDNAV_OUT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*simulate) return run_simulate(sim, args);
    if (*train) return run_train(tr, args);
    if (*evaluate) return run_evaluate(ev, args);
    if (*calibrate) return run_calibrate(cal, args);
    if (*render) return run_render(ren, args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const crowdnav::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const crowdnav::ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
