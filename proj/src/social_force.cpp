#include "crowdnav/social_force.hpp"

#include <cmath>

#include "crowdnav/world.hpp"

namespace crowdnav {

Vec2 social_force(const AgentState& agent, std::span<const AgentState> neighbors,
                  const SocialForceParams& params, double dt) {
  const Vec2 preferred = preferred_velocity(agent.position, agent.goal, agent.max_speed, dt);
  Vec2 force = (preferred - agent.velocity) / params.relaxation_time;
  const double cutoff_sq = params.neighbor_cutoff * params.neighbor_cutoff;
  for (const AgentState& other : neighbors) {
    const Vec2 offset = agent.position - other.position;
    const double dist_sq = offset.squared_norm();
    if (dist_sq > cutoff_sq) continue;
    const double dist = std::sqrt(dist_sq);
    Vec2 direction;
    if (dist > 0.0) {
      direction = offset / dist;
    } else {
      direction = agent.id < other.id ? Vec2{-1.0, 0.0} : Vec2{1.0, 0.0};
    }
    const double magnitude =
        params.repulsion_strength *
        std::exp((agent.radius + other.radius - dist) / params.repulsion_range);
    force += magnitude * direction;
  }
  return force;
}

Vec2 social_force_velocity(const AgentState& agent, std::span<const AgentState> neighbors,
                           const SocialForceParams& params, double dt) {
  const Vec2 force = social_force(agent, neighbors, params, dt);
  return clamp_velocity(agent.velocity + force * dt, agent.max_speed);
}

}  // namespace crowdnav
