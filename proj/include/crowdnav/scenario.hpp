#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "crowdnav/world.hpp"

namespace crowdnav {

struct GroupSpec {
  int min_size = 2;
  int max_size = 4;
  double intra_group_spacing = 0.6;  // member ring radius around the leader (m)
  bool shared_goal = true;
};

struct ScenarioConfig {
  double arena_width = 12.0;
  double arena_height = 12.0;
  int human_count = 20;
  double human_radius_min = 0.3;
  double human_radius_max = 0.5;
  double human_vmax = 1.0;
  double robot_vmax = 1.0;
  double robot_radius = 0.2;
  double time_limit = 50.0;
  double dt = 0.25;
  Behavior behavior = Behavior::Orca;
  double rushing_fraction = 0.0;
  double rushing_vmax = 2.0;
  std::optional<GroupSpec> grouping;
  bool robot_visible = false;
  bool robot_confined = true;
  GoalResample goal_resample;
  OrcaParams orca;
  SocialForceParams social_force;
  // Start/goal separation for the robot, as a fraction of the shorter arena side.
  double robot_goal_min_fraction = 0.6;
  double spawn_margin = 0.1;  // extra clearance between spawned bodies (m)

  /// Throws InputError when a field is out of range.
  void validate() const;

  /// Desk-scale training scenario: 5 humans in an 8x8 m arena.
  static ScenarioConfig desk();
};

enum class OodVariant { Rushing, SFModel, Groups };

std::string_view to_string(OodVariant v);
OodVariant ood_from_string(std::string_view s);

/// Samples a fresh episode. Humans never overlap each other or the robot at
/// spawn. Throws ScenarioError when placement fails.
WorldState spawn_scenario(const ScenarioConfig& config, std::uint64_t seed);

/// The out-of-distribution families derived from an in-distribution config.
ScenarioConfig make_ood_variant(const ScenarioConfig& config, OodVariant variant);

void to_json(nlohmann::json& j, const ScenarioConfig& c);
void from_json(const nlohmann::json& j, ScenarioConfig& c);

/// Reads and validates a scenario JSON file. Missing fields keep their defaults.
ScenarioConfig load_scenario(const std::string& path);

}  // namespace crowdnav
