#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "crowdnav/observation.hpp"

namespace crowdnav {

struct NetworkConfig {
  int encoder_width = 32;
  int hidden_width = 64;
  // Actor and reward critic share encoder and trunk; the cost critic always
  // has its own.
  bool share_actor_reward = true;
  double init_log_std = -0.5;
  bool operator==(const NetworkConfig&) const = default;
};

constexpr double kMinLogStd = -5.0;
constexpr double kMaxLogStd = 2.0;

struct DenseLayout {
  std::size_t weight = 0;  // out x in, row-major
  std::size_t bias = 0;
  int in = 0;
  int out = 0;
};

/// Per-human encoder (two tanh layers), masked mean pooling, then a two-layer
/// tanh trunk over [robot block, pooled features].
struct TowerLayout {
  DenseLayout encoder1, encoder2, trunk1, trunk2;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// All network parameters in one flat vector plus the layout that slices it.
class PolicyParams {
 public:
  PolicyParams(ObservationSpec obs, NetworkConfig net);

  /// Scaled-Gaussian initialisation; small actor head so the initial mean is near zero.
  static PolicyParams random(ObservationSpec obs, NetworkConfig net, std::uint64_t seed);

  const ObservationSpec& observation_spec() const { return obs_; }
  const NetworkConfig& network_config() const { return net_; }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  const TowerLayout& actor_tower() const { return actor_; }
  const TowerLayout& reward_tower() const { return net_.share_actor_reward ? actor_ : reward_; }
  const TowerLayout& cost_tower() const { return cost_; }
  const DenseLayout& actor_head() const { return actor_head_; }
  const DenseLayout& reward_head() const { return reward_head_; }
  const DenseLayout& cost_head() const { return cost_head_; }
  std::size_t log_std_offset() const { return log_std_; }

  /// Index ranges [begin, end) that belong to the cost critic.
  std::vector<std::pair<std::size_t, std::size_t>> cost_ranges() const;
  /// Index ranges that belong only to the actor (mean head, log-std, and the
  /// actor tower when it is not shared).
  std::vector<std::pair<std::size_t, std::size_t>> actor_only_ranges() const;

 private:
  ObservationSpec obs_;
  NetworkConfig net_;
  TowerLayout actor_, reward_, cost_;
  DenseLayout actor_head_, reward_head_, cost_head_;
  std::size_t log_std_ = 0;
  Eigen::VectorXd values_;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Observations stacked for batched evaluation. Human rows are sample-major:
/// row b*max_humans + slot.
struct ObservationBatch {
  Eigen::MatrixXd robot;   // B x kRobotDim
  Eigen::MatrixXd humans;  // (B*max_humans) x human_dim
  Eigen::MatrixXd mask;    // B x max_humans
  int size() const { return static_cast<int>(robot.rows()); }
};

ObservationBatch make_batch(std::span<const Observation> observations, const ObservationSpec& spec);
ObservationBatch make_batch(std::span<const Observation> observations, std::span<const int> rows,
                            const ObservationSpec& spec);

struct PolicyOutput {
  Eigen::MatrixXd mean;  // B x 2
  Eigen::Vector2d log_std;
  Eigen::VectorXd reward_value;
  Eigen::VectorXd cost_value;
};

PolicyOutput policy_forward(const PolicyParams& params, const ObservationBatch& batch);

struct SinglePolicyOutput {
  Vec2 mean;
  Vec2 log_std;
  double reward_value = 0.0;
  double cost_value = 0.0;
};

SinglePolicyOutput policy_forward(const PolicyParams& params, const Observation& obs);

/// Diagonal-Gaussian log density and entropy.
std::pair<double, double> log_prob_and_entropy(const Vec2& mean, const Vec2& log_std,
                                               const Vec2& action);

/// Clipped-surrogate and value-regression settings. The minimised objective is
///   -policy_weight * l_pi + reward_weight * l_R + cost_weight * l_C
/// with l_pi = mean(min(r A, clip(r, 1-eps, 1+eps) A)),
///      l_R = mean(c1 (V_R - target_R)^2), l_C = mean(c2 (V_C - target_C)^2).
struct LossSpec {
  double policy_weight = 1.0;
  double reward_weight = 1.0;
  double cost_weight = 1.0;
  double clip = 0.08;
  double c1 = 0.5;
  double c2 = 0.5;
};

struct TrainingBatch {
  ObservationBatch obs;
  Eigen::MatrixXd actions;  // B x 2, policy frame, pre-clamp
  Eigen::VectorXd old_log_prob;
  Eigen::VectorXd advantage;  // combined advantage
  Eigen::VectorXd reward_target;
  Eigen::VectorXd cost_target;
};

struct LossValues {
  double policy = 0.0;  // l_pi (maximised)
  double reward = 0.0;  // l_R
  double cost = 0.0;    // l_C
  double total = 0.0;   // minimised objective
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

LossValues evaluate_losses(const PolicyParams& params, const TrainingBatch& batch,
                           const LossSpec& spec);

struct LossGradient {
  LossValues losses;
  Eigen::VectorXd gradient;  // d total / d params, same layout as PolicyParams
};

/// Exact reverse-mode gradient of the minimised objective.
LossGradient policy_backward(const PolicyParams& params, const TrainingBatch& batch,
                             const LossSpec& spec);

/// Checkpoint container: format tag, version, config hash, network shape and
/// the flat parameter vector.
nlohmann::json checkpoint_json(const PolicyParams& params, const nlohmann::json& run_config);
PolicyParams params_from_checkpoint(const nlohmann::json& j);
void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const nlohmann::json& run_config);
PolicyParams load_checkpoint(const std::string& path);

}  // namespace crowdnav
