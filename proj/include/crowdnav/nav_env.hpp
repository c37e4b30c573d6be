#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "crowdnav/conformal.hpp"
#include "crowdnav/observation.hpp"
#include "crowdnav/prediction.hpp"
#include "crowdnav/safety_cost.hpp"
#include "crowdnav/scenario.hpp"

namespace crowdnav {

enum class PredictorKind { ConstantVelocity, NoisyOracle };

struct EnvConfig {
  ScenarioConfig scenario;
  ObservationSpec observation;
  DtaciConfig dtaci;
  QueryMode query_mode = QueryMode::Sampled;
  SafetyConfig safety;
  RewardConfig reward;
  PredictorKind predictor = PredictorKind::ConstantVelocity;
  double oracle_noise = 0.2;  // NoisyOracle only

  /// Observation slots follow the scenario's human count, horizon K = 5.
  static EnvConfig for_scenario(const ScenarioConfig& scenario);
  void validate() const;
};

void to_json(nlohmann::json& j, const EnvConfig& c);
void from_json(const nlohmann::json& j, EnvConfig& c);

/// What the trainer sees of one step. Actions are in the observation frame.
struct EnvStep {
  double reward = 0.0;
  double cost = 0.0;
  bool done = false;
  bool success = false;
};

/// Minimal surface the PPO-Lagrangian trainer drives.
class TrainingEnv {
 public:
  virtual ~TrainingEnv() = default;
  /// Starts the next episode and returns its first observation.
  virtual const Observation& reset() = 0;
  virtual const Observation& observation() const = 0;
  virtual EnvStep step_policy(const Vec2& policy_action) = 0;
};

struct NavStep {
  Event event = Event::Running;
  double reward = 0.0;
  double cost = 0.0;
  double intrusion = 0.0;
  int human_contacts = 0;
  std::vector<ErrorSample> errors;  // realised errors scored against issued radii
};

/// One crowd-navigation episode at a time: simulator, CV (or noisy oracle)
/// predictor, a fresh DtACI bank per episode, safety cost and observation.
/// Step order: physics, DtACI update on the new positions, predict, query,
/// cost against the new areas, encode.
class CrowdNavEnv final : public TrainingEnv {
 public:
  /// `seed` drives the sequence of episode seeds and the query sampling.
  CrowdNavEnv(EnvConfig config, std::uint64_t seed);

  const Observation& reset() override;
  void reset_episode(std::uint64_t episode_seed);
  const Observation& observation() const override { return obs_; }
  EnvStep step_policy(const Vec2& policy_action) override;

  /// World-frame velocity command; clamped by the simulator.
  NavStep step(const Vec2& world_action);

  const EnvConfig& config() const { return config_; }
  const WorldState& world() const { return world_; }
  const PredictionSet& prediction() const { return prediction_; }
  const UncertaintyGrid& radii() const { return radii_; }
  const DtaciBank& bank() const { return *bank_; }
  std::uint64_t episode_seed() const { return episode_seed_; }
  bool done() const { return world_.terminated; }

 private:
  void refresh();

  EnvConfig config_;
  Rng seed_stream_;
  Rng query_rng_;
  std::unique_ptr<Predictor> predictor_;
  std::uint64_t episode_seed_ = 0;
  WorldState world_;
  std::optional<DtaciBank> bank_;
  PredictionSet prediction_;
  UncertaintyGrid radii_;
  Observation obs_;
};

/// One-state CMDP with reward = cost = clamp(a_x, 0, 1) and one-step
/// episodes. Its constrained optimum under cost limit d is a = d.
class SyntheticCmdpEnv final : public TrainingEnv {
 public:
  explicit SyntheticCmdpEnv(const ObservationSpec& spec);
  const Observation& reset() override { return obs_; }
  const Observation& observation() const override { return obs_; }
  EnvStep step_policy(const Vec2& policy_action) override;

 private:
  Observation obs_;
};

/// Builds environment `index` of a trainer's vector from a derived seed.
using EnvFactory = std::function<std::unique_ptr<TrainingEnv>(int index, std::uint64_t seed)>;

EnvFactory crowd_env_factory(const EnvConfig& config);
EnvFactory synthetic_env_factory(const ObservationSpec& spec);

}  // namespace crowdnav
