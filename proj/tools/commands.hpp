#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace crowdnav::cli {

// Thrown for bad flags or unusable inputs; main maps it to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScenarioArgs {
  std::string scenario;  // JSON path; empty = built-in preset
  std::string preset = "desk";
  std::optional<std::string> ood;
};

struct SimulateArgs {
  ScenarioArgs scenario;
  std::string policy = "orca";
  int episodes = 1;
  std::uint64_t seed = 0;
  std::string out = "out/simulate";
};

struct TrainArgs {
  ScenarioArgs scenario;
  std::string trainer_config;  // optional JSON overrides
  std::optional<double> cost_limit;
  std::optional<long long> steps;
  std::optional<int> envs;
  std::optional<double> lr;
  std::optional<int> threads;
  bool freeze_lambda = false;
  bool no_uncertainty = false;
  std::uint64_t seed = 0;
  std::string out = "out/train";
};

struct EvaluateArgs {
  ScenarioArgs scenario;
  std::vector<std::string> policies{"orca"};
  std::vector<std::string> variants;  // extra OOD variants besides the base
  int episodes = 50;
  int seeds = 5;
  int danger_window = 2;
  std::string out = "out/evaluate";
};

struct CalibrateArgs {
  std::string trace;
  double alpha = 0.1;
  int horizon = 5;
  std::uint64_t seed = 0;
  std::string out = "coverage.csv";
};

struct RenderArgs {
  std::string trace;
  int episode = 0;
  std::string out = "frames";
};

int run_simulate(const SimulateArgs& a, const std::vector<std::string>& argv);
int run_train(const TrainArgs& a, const std::vector<std::string>& argv);
int run_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv);
int run_calibrate(const CalibrateArgs& a, const std::vector<std::string>& argv);
int run_render(const RenderArgs& a, const std::vector<std::string>& argv);

}  // namespace crowdnav::cli
