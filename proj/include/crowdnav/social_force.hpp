#pragma once

#include <span>

#include "crowdnav/agent.hpp"

namespace crowdnav {

/// Net social force on `agent`: relaxation toward the preferred velocity plus
/// exponential repulsion A*exp((r_i + r_j - d_ij)/B) from every neighbour
/// within the cutoff. Coincident agents are pushed apart along +x / -x by id
/// order.
Vec2 social_force(const AgentState& agent, std::span<const AgentState> neighbors,
                  const SocialForceParams& params, double dt);

/// v + force*dt clamped to the agent's max speed.
Vec2 social_force_velocity(const AgentState& agent, std::span<const AgentState> neighbors,
                           const SocialForceParams& params, double dt);

}  // namespace crowdnav
