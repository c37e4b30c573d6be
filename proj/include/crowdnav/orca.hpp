#pragma once

#include <span>
#include <vector>

#include "crowdnav/agent.hpp"

namespace crowdnav {

/// Directed line in velocity space. Velocities on the left of `direction`
/// (det(direction, point - v) <= 0) satisfy the constraint.
struct OrcaLine {
  Vec2 point;
  Vec2 direction;
};

/// Reciprocal half-planes induced on `agent` by each neighbour within the
/// neighbour distance.
std::vector<OrcaLine> orca_lines(const AgentState& agent, std::span<const AgentState> neighbors,
                                 double dt, const OrcaParams& params);

/// Velocity closest to `preferred` inside all half-planes and the max-speed
/// disc; when the constraints are infeasible, the velocity minimising the
/// largest violation (3D linear program).
Vec2 solve_orca(std::span<const OrcaLine> lines, const Vec2& preferred, double max_speed);

/// ORCA velocity for `agent` given its neighbours. Preferred velocity heads to
/// the agent's goal at max speed.
Vec2 orca_velocity(const AgentState& agent, std::span<const AgentState> neighbors, double dt,
                   const OrcaParams& params);

/// Signed violation of a line by v; positive means outside the half-plane.
inline double orca_violation(const OrcaLine& line, const Vec2& v) {
  return det(line.direction, line.point - v);
}

}  // namespace crowdnav
