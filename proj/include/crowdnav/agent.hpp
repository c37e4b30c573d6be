#pragma once

#include <string>
#include <string_view>

#include "crowdnav/geometry.hpp"

namespace crowdnav {

enum class Behavior { Orca, SocialForce };

std::string_view to_string(Behavior b);
Behavior behavior_from_string(std::string_view s);

/// A pedestrian. `id` is stable over an episode and orders coincident agents.
struct AgentState {
  int id = 0;
  Vec2 position;
  Vec2 velocity;
  double radius = 0.3;
  Vec2 goal;
  double max_speed = 1.0;
  Behavior behavior = Behavior::Orca;
  // Group membership: -1 for individuals. Members follow the leader's goal
  // shifted by goal_offset.
  int group = -1;
  bool group_leader = false;
  Vec2 goal_offset;
};

struct RobotState {
  Vec2 position;
  Vec2 velocity;
  double radius = 0.2;
  Vec2 goal;
  double max_speed = 1.0;
};

/// RVO2 defaults.
struct OrcaParams {
  double time_horizon = 5.0;
  double neighbor_distance = 10.0;
};

struct SocialForceParams {
  double relaxation_time = 0.5;
  double repulsion_strength = 2.0;
  double repulsion_range = 0.3;
  double neighbor_cutoff = 4.0;
};

/// Unit vector to goal times max speed, shortened when the goal is reachable
/// within one step so agents do not overshoot.
Vec2 preferred_velocity(const Vec2& position, const Vec2& goal, double max_speed, double dt);

/// The robot viewed as a pedestrian-like agent (used when it is visible, and
/// by the rule-based planners).
AgentState as_agent(const RobotState& robot, Behavior behavior, int id = -1);

}  // namespace crowdnav
