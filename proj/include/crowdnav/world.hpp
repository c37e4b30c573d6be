#pragma once

#include <string_view>
#include <vector>

#include "crowdnav/agent.hpp"
#include "crowdnav/geometry.hpp"

namespace crowdnav {

struct GoalResample {
  int period = 5;            // steps
  double probability = 0.5;  // per human, per period
};

/// Parameters the crowd needs while an episode runs.
struct CrowdParams {
  double arena_width = 12.0;
  double arena_height = 12.0;
  OrcaParams orca;
  SocialForceParams social_force;
  GoalResample resample;
  // Keep the robot body inside the arena (it slides along the edge).
  bool confine_robot = true;
};

struct WorldState {
  std::vector<AgentState> humans;
  RobotState robot;
  int step_index = 0;
  double dt = 0.25;
  double time_limit = 50.0;
  bool robot_visible = false;
  bool terminated = false;
  CrowdParams crowd;
  Rng rng;  // drives goal resampling; owned by the episode

  /// ceil(time_limit / dt)
  int max_steps() const;
};

enum class Event { Running, ReachedGoal, Collision, Timeout };

std::string_view to_string(Event e);
Event event_from_string(std::string_view s);

struct Transition {
  WorldState next_state;
  Event event = Event::Running;
  double robot_displacement_toward_goal = 0.0;
  int human_contacts = 0;  // overlapping human pairs; recorded, never terminal
};

/// v if it is within v_max, otherwise v rescaled onto the v_max circle.
Vec2 clamp_velocity(const Vec2& v, double v_max);

/// New velocities for every human from its behaviour policy, computed
/// simultaneously from the current state. The robot is a neighbour only when
/// it is visible.
std::vector<Vec2> human_velocities(const WorldState& world);

/// Advances the episode by one Euler step of length dt and classifies the
/// outcome (Collision > ReachedGoal > Timeout > Running).
Transition step_episode(const WorldState& world, const Vec2& robot_action);

/// Every `period` steps each human independently draws a new uniform goal in
/// the arena with the configured probability. Humans that have arrived at
/// their goal always draw a new one. Group members follow their leader.
void resample_goals(WorldState& world, Rng& rng);

/// Ground-truth human positions for the next `steps` steps, obtained by
/// simulating a copy of the world with the robot holding its velocity.
/// Exact whenever the robot is invisible to the crowd.
std::vector<std::vector<Vec2>> rollout_human_future(const WorldState& world, int steps);

}  // namespace crowdnav
