#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "crowdnav/nav_env.hpp"
#include "crowdnav/policy.hpp"

namespace crowdnav {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> targets;  // advantages + values
};

/// Generalised advantage estimation over one flat sequence. `dones[t]` marks
/// that step t ended its episode (no bootstrap past it); `last_value` is
/// V(s_{T}) used when the final step is not terminal.
GaeResult compute_gae(std::span<const double> signal, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double last_value, double gamma,
                      double gae_lambda);

/// (A_R - lambda*A_C) / (1 + lambda), elementwise.
std::vector<double> combined_advantage(std::span<const double> reward_adv,
                                       std::span<const double> cost_adv, double lambda);

/// Zero mean, unit standard deviation (no-op on the scale when std is ~0).
void normalize_in_place(std::vector<double>& v);

/// max(0, lambda + rate*(mean_cost - cost_limit)).
double lambda_update(double lambda, double mean_cost, double cost_limit, double rate);

struct TrainerConfig {
  double cost_limit = 0.4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.08;
  double actor_lr = 3e-5;
  double cost_lr = 1.5e-5;
  double lambda_lr = 0.05;
  double lambda_init = 0.0;
  bool freeze_lambda = false;
  double c1 = 0.5;
  double c2 = 0.5;
  bool normalize_advantages = true;
  double max_grad_norm = 0.5;
  int epochs = 4;
  int minibatch = 256;
  int envs = 16;
  int steps_per_env = 128;
  long long total_steps = 1'000'000;
  int threads = 1;  // rollout workers
  NetworkConfig network;

  void validate() const;

  /// Settings used for the 5-human, 8x8 m runs.
  static TrainerConfig desk();
};

void to_json(nlohmann::json& j, const TrainerConfig& c);
void from_json(const nlohmann::json& j, TrainerConfig& c);

/// One row of the training curve. Episode statistics cover episodes that
/// finished inside the iteration's rollout window; NaN when none did.
struct CurvePoint {
  int iteration = 0;
  long long steps = 0;
  int episodes = 0;
  double mean_reward = 0.0;  // mean episodic return
  double mean_cost = 0.0;    // mean episodic cost
  double success_rate = 0.0;
  double lambda = 0.0;       // after this iteration's update
  double policy_loss = 0.0;
  double approx_kl = 0.0;
};

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);
void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve);

struct TrainResult {
  PolicyParams params;
  std::vector<CurvePoint> curve;
  double lambda = 0.0;
};

/// Adam with one learning rate per parameter group.
class Adam {
 public:
  Adam(std::size_t size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void set_rate(std::size_t begin, std::size_t end, double rate);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  Eigen::VectorXd m_, v_, rate_;
  double beta1_, beta2_, eps_;
  long long t_ = 0;
};

using ProgressFn = std::function<void(const CurvePoint&)>;

/// PPO-Lagrangian: alternates batched rollouts over `config.envs` environments
/// with clipped-surrogate updates and the projected dual step on lambda.
/// Throws TrainingError on a non-finite loss; `dump_path`, when set, receives
/// a JSON diagnostic first.
TrainResult train(const EnvFactory& factory, const ObservationSpec& spec,
                  const TrainerConfig& config, std::uint64_t seed, const ProgressFn& progress = {},
                  const std::string& dump_path = {});

/// Mean of a curve column over the last `fraction` of iterations, skipping NaN.
double tail_mean(const std::vector<CurvePoint>& curve, double CurvePoint::*field,
                 double fraction = 0.25);

}  // namespace crowdnav
