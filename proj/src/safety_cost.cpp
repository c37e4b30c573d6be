#include "crowdnav/safety_cost.hpp"

#include <algorithm>

#include "crowdnav/errors.hpp"

namespace crowdnav {

SafetyAreas build_safety_areas(const WorldState& world, const PredictionSet& prediction,
                               const UncertaintyGrid& radii, const SafetyConfig& config) {
  const int n = static_cast<int>(world.humans.size());
  const int horizon = std::min({config.cost_horizon, prediction.horizon(), radii.horizon()});
  if (config.cost_horizon > 0 && (prediction.humans() != n || radii.humans() != n)) {
    throw InputError("build_safety_areas: prediction/uncertainty shapes do not match the world");
  }
  SafetyAreas areas;
  areas.cost_horizon = std::max(horizon, 0);
  const double r_ego = world.robot.radius;
  areas.current_discs.reserve(static_cast<std::size_t>(n));
  for (const AgentState& h : world.humans) {
    areas.current_discs.push_back({h.position, r_ego + h.radius + config.comfort_radius});
  }
  areas.predicted_discs.reserve(static_cast<std::size_t>(n * areas.cost_horizon));
  for (int h = 0; h < n; ++h) {
    const double base = r_ego + world.humans[static_cast<std::size_t>(h)].radius;
    for (int k = 1; k <= areas.cost_horizon; ++k) {
      areas.predicted_discs.push_back(
          {prediction.point(h, k), base + std::max(radii.at(h, k), 0.0)});
    }
  }
  return areas;
}

double max_intrusion(const Vec2& robot_pos, const SafetyAreas& areas) {
  double deepest = 0.0;
  auto scan = [&](const std::vector<Disc>& discs) {
    for (const Disc& d : discs) {
      deepest = std::max(deepest, d.radius - distance(robot_pos, d.center));
    }
  };
  scan(areas.current_discs);
  scan(areas.predicted_discs);
  return deepest;
}

double step_cost(double intrusion, double cost_scale) {
  if (intrusion < 0.0) throw InputError("step_cost: negative intrusion");
  return cost_scale * intrusion;
}

double step_reward(const Transition& transition, const RewardConfig& config) {
  switch (transition.event) {
    case Event::ReachedGoal: return config.success;
    case Event::Collision: return config.collision;
    case Event::Running:
    case Event::Timeout: return config.potential_scale * transition.robot_displacement_toward_goal;
  }
  return 0.0;
}

}  // namespace crowdnav
