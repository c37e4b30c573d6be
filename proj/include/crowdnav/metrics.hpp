#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdnav/baselines.hpp"
#include "crowdnav/nav_env.hpp"
#include "crowdnav/policy.hpp"

namespace crowdnav {

struct StepRecord {
  int step = 0;  // step index after the transition
  Vec2 robot_position;
  Vec2 robot_velocity;
  Vec2 action;  // commanded world-frame velocity, before clamping
  std::vector<Vec2> human_positions;
  std::vector<Vec2> human_velocities;
  Event event = Event::Running;
  double reward = 0.0;
  double cost = 0.0;
  double intrusion = 0.0;
  std::vector<Vec2> predictions;  // H x K, human-major, issued after the step
  std::vector<double> radii;      // H x K, queried with the predictions
  bool danger = false;
  double danger_distance = 0.0;  // NaN unless danger
};

/// One episode. The header fields fix everything the step records refer to.
struct EpisodeTrace {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string config_hash;
  double dt = 0.25;
  double arena_width = 0.0;
  double arena_height = 0.0;
  double robot_radius = 0.2;
  Vec2 robot_start;
  Vec2 robot_goal;
  std::vector<double> human_radii;
  std::vector<Vec2> human_start;
  int horizon = 0;
  std::vector<StepRecord> steps;

  Event terminal_event() const;
  double duration() const { return static_cast<double>(steps.size()) * dt; }
  double path_length() const;
  /// Exactly one terminal event, on the last record. Throws StateError otherwise.
  void validate() const;
};

struct DangerResult {
  bool flag = false;
  double min_distance = 0.0;  // NaN unless flagged
};

/// Flags the robot when its centre lies within r_ego + r_h of any human's
/// ground-truth position in `future` (future[w][h], w = 1..window). When
/// flagged, min_distance is the smallest current surface gap
/// |p_ego - p_h| - r_ego - r_h.
DangerResult danger_check(const Vec2& robot_pos, double robot_radius,
                          std::span<const Vec2> current, std::span<const std::vector<Vec2>> future,
                          std::span<const double> radii);

/// Sets danger flags from the trace's own later records; the window shrinks
/// at the end of the episode.
void annotate_danger(EpisodeTrace& trace, int window = 2);

struct MetricsTable {
  int episodes = 0;
  double sr = 0.0;
  double cr = 0.0;
  double tr = 0.0;
  double nt = 0.0;  // NaN when no episode succeeded
  double pl = 0.0;
  double itr = 0.0;
  double sd = 0.0;  // NaN when no danger step was logged
};

/// Throws InputError on an empty set.
MetricsTable compute_metrics(std::span<const EpisodeTrace> traces);

/// Chooses a world-frame velocity from the environment's current state.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void begin_episode(std::uint64_t /*episode_seed*/) {}
  virtual Vec2 act(const CrowdNavEnv& env) = 0;
};

/// Deterministic mean action of a policy (stochastic only when asked).
class PolicyController final : public Controller {
 public:
  explicit PolicyController(PolicyParams params, bool stochastic = false);
  void begin_episode(std::uint64_t episode_seed) override;
  Vec2 act(const CrowdNavEnv& env) override;
  const PolicyParams& params() const { return params_; }

 private:
  PolicyParams params_;
  bool stochastic_;
  Rng rng_;
};

class MpcController final : public Controller {
 public:
  explicit MpcController(MpcConfig config = {});
  void begin_episode(std::uint64_t episode_seed) override;
  Vec2 act(const CrowdNavEnv& env) override;

 private:
  MpcConfig config_;
  Rng rng_;
};

class OrcaController final : public Controller {
 public:
  Vec2 act(const CrowdNavEnv& env) override;
};

class SfController final : public Controller {
 public:
  explicit SfController(SocialForceParams params = {}) : params_(params) {}
  Vec2 act(const CrowdNavEnv& env) override;

 private:
  SocialForceParams params_;
};

/// Runs one episode to its terminal event and records it.
EpisodeTrace run_episode(CrowdNavEnv& env, Controller& controller, std::uint64_t episode_seed,
                         const std::string& label, int danger_window = 2);

/// Episode seed for (test seed, episode index).
std::uint64_t episode_seed(std::uint64_t test_seed, int episode);

struct Variant {
  std::string name;
  ScenarioConfig scenario;
};

struct CampaignConfig {
  std::vector<Variant> variants;
  std::vector<std::uint64_t> test_seeds{0, 1, 2, 3, 4};
  int episodes_per_seed = 50;
  int danger_window = 2;
  EnvConfig env;  // template; scenario replaced per variant
};

struct CampaignRow {
  std::string variant;
  MetricsTable mean;
  MetricsTable std;  // across training seeds
  std::vector<MetricsTable> per_policy;
};

/// One controller factory per training seed. Every (variant, test seed)
/// block is evaluated for each of them; rows report mean and std across them.
using ControllerFactory = std::function<std::unique_ptr<Controller>()>;

std::vector<CampaignRow> run_campaign(std::span<const ControllerFactory> policies,
                                      const CampaignConfig& config);

void write_metrics_csv(std::ostream& out, std::span<const CampaignRow> rows);
void write_metrics_csv(const std::string& path, std::span<const CampaignRow> rows);

}  // namespace crowdnav
