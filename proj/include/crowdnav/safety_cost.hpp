#pragma once

#include <vector>

#include "crowdnav/conformal.hpp"
#include "crowdnav/prediction.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

struct Disc {
  Vec2 center;
  double radius = 0.0;
};

/// Comfort discs around current human positions and uncertainty discs around
/// the first K' predicted positions.
struct SafetyAreas {
  std::vector<Disc> current_discs;    // radius r_ego + r_h + r_comfort
  std::vector<Disc> predicted_discs;  // radius r_ego + r_h + delta_hat_{h,k}, h-major
  int cost_horizon = 0;               // K'
};

struct SafetyConfig {
  double comfort_radius = 0.25;  // r_comfort (m)
  int cost_horizon = 2;          // K'
  double cost_scale = 2.5;       // mu
};

struct RewardConfig {
  double success = 10.0;
  double collision = -20.0;
  double potential_scale = 2.0;  // reward per metre gained toward the goal
};

SafetyAreas build_safety_areas(const WorldState& world, const PredictionSet& prediction,
                               const UncertaintyGrid& radii, const SafetyConfig& config);

/// Deepest penetration of `robot_pos` into any disc; 0 outside all discs.
double max_intrusion(const Vec2& robot_pos, const SafetyAreas& areas);

/// C_t = mu * d_intru.
double step_cost(double intrusion, double cost_scale = 2.5);

/// +success on reaching the goal, collision penalty on contact, otherwise the
/// potential term on the distance gained toward the goal.
double step_reward(const Transition& transition, const RewardConfig& config = {});

struct StepSignal {
  double reward = 0.0;
  double cost = 0.0;
  double intrusion = 0.0;
};

}  // namespace crowdnav
