#include "crowdnav/orca.hpp"

#include <algorithm>
#include <cmath>

#include "crowdnav/world.hpp"

namespace crowdnav {
namespace {

constexpr double kEps = 1e-9;

// Optimises along line `index` subject to the earlier lines and the speed disc.
bool solve_on_line(std::span<const OrcaLine> lines, std::size_t index, double radius,
                   const Vec2& target, bool direction_mode, Vec2& result) {
  const OrcaLine& line = lines[index];
  const double along = dot(line.point, line.direction);
  const double discriminant = along * along + radius * radius - line.point.squared_norm();
  if (discriminant < 0.0) return false;

  const double root = std::sqrt(discriminant);
  double t_left = -along - root;
  double t_right = -along + root;

  for (std::size_t i = 0; i < index; ++i) {
    const double denominator = det(line.direction, lines[i].direction);
    const double numerator = det(lines[i].direction, line.point - lines[i].point);
    if (std::abs(denominator) <= kEps) {
      if (numerator < 0.0) return false;
      continue;
    }
    const double t = numerator / denominator;
    if (denominator >= 0.0) {
      t_right = std::min(t_right, t);
    } else {
      t_left = std::max(t_left, t);
    }
    if (t_left > t_right) return false;
  }

  if (direction_mode) {
    result = dot(target, line.direction) > 0.0 ? line.point + t_right * line.direction
                                               : line.point + t_left * line.direction;
  } else {
    const double t = dot(line.direction, target - line.point);
    result = line.point + std::clamp(t, t_left, t_right) * line.direction;
  }
  return true;
}

// Returns the index of the first line that could not be satisfied, or
// lines.size() on success.
std::size_t solve_2d(std::span<const OrcaLine> lines, double radius, const Vec2& target,
                     bool direction_mode, Vec2& result) {
  if (direction_mode) {
    result = target * radius;
  } else if (target.squared_norm() > radius * radius) {
    result = normalized(target) * radius;
  } else {
    result = target;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (orca_violation(lines[i], result) > 0.0) {
      const Vec2 previous = result;
      if (!solve_on_line(lines, i, radius, target, direction_mode, result)) {
        result = previous;
        return i;
      }
    }
  }
  return lines.size();
}

// Minimises the maximum violation over lines [begin, end) while keeping the
// earlier lines satisfied.
void solve_3d(std::span<const OrcaLine> lines, std::size_t begin, double radius, Vec2& result) {
  double worst = 0.0;
  std::vector<OrcaLine> projected;
  for (std::size_t i = begin; i < lines.size(); ++i) {
    if (orca_violation(lines[i], result) <= worst) continue;
    projected.clear();
    for (std::size_t j = 0; j < i; ++j) {
      OrcaLine line;
      const double determinant = det(lines[i].direction, lines[j].direction);
      if (std::abs(determinant) <= kEps) {
        if (dot(lines[i].direction, lines[j].direction) > 0.0) continue;
        line.point = 0.5 * (lines[i].point + lines[j].point);
      } else {
        line.point = lines[i].point +
                     (det(lines[j].direction, lines[i].point - lines[j].point) / determinant) *
                         lines[i].direction;
      }
      line.direction = normalized(lines[j].direction - lines[i].direction);
      projected.push_back(line);
    }
    const Vec2 previous = result;
    const Vec2 normal{-lines[i].direction.y, lines[i].direction.x};
    if (solve_2d(projected, radius, normal, true, result) < projected.size()) {
      result = previous;
    }
    worst = orca_violation(lines[i], result);
  }
}

}  // namespace

std::vector<OrcaLine> orca_lines(const AgentState& agent, std::span<const AgentState> neighbors,
                                 double dt, const OrcaParams& params) {
  std::vector<OrcaLine> lines;
  lines.reserve(neighbors.size());
  const double inv_horizon = 1.0 / params.time_horizon;
  const double range_sq = params.neighbor_distance * params.neighbor_distance;

  for (const AgentState& other : neighbors) {
    const Vec2 rel_position = other.position - agent.position;
    const Vec2 rel_velocity = agent.velocity - other.velocity;
    const double dist_sq = rel_position.squared_norm();
    if (dist_sq > range_sq) continue;
    const double combined_radius = agent.radius + other.radius;
    const double combined_radius_sq = combined_radius * combined_radius;

    OrcaLine line;
    Vec2 u;
    if (dist_sq > combined_radius_sq) {
      // No collision yet: velocity obstacle truncated at the time horizon.
      const Vec2 w = rel_velocity - inv_horizon * rel_position;
      const double w_length_sq = w.squared_norm();
      const double dot1 = dot(w, rel_position);
      if (dot1 < 0.0 && dot1 * dot1 > combined_radius_sq * w_length_sq) {
        const double w_length = std::sqrt(w_length_sq);
        const Vec2 unit_w = w / w_length;
        line.direction = {unit_w.y, -unit_w.x};
        u = (combined_radius * inv_horizon - w_length) * unit_w;
      } else {
        const double leg = std::sqrt(dist_sq - combined_radius_sq);
        if (det(rel_position, w) > 0.0) {
          line.direction = Vec2{rel_position.x * leg - rel_position.y * combined_radius,
                                rel_position.x * combined_radius + rel_position.y * leg} /
                           dist_sq;
        } else {
          line.direction = -Vec2{rel_position.x * leg + rel_position.y * combined_radius,
                                 -rel_position.x * combined_radius + rel_position.y * leg} /
                           dist_sq;
        }
        u = dot(rel_velocity, line.direction) * line.direction - rel_velocity;
      }
    } else {
      // Already overlapping: resolve within one time step.
      const double inv_dt = 1.0 / dt;
      const Vec2 w = rel_velocity - inv_dt * rel_position;
      const double w_length = w.norm();
      Vec2 unit_w;
      if (w_length > kEps) {
        unit_w = w / w_length;
      } else {
        unit_w = agent.id < other.id ? Vec2{-1.0, 0.0} : Vec2{1.0, 0.0};
      }
      line.direction = {unit_w.y, -unit_w.x};
      u = (combined_radius * inv_dt - w_length) * unit_w;
    }
    line.point = agent.velocity + 0.5 * u;
    lines.push_back(line);
  }
  return lines;
}

Vec2 solve_orca(std::span<const OrcaLine> lines, const Vec2& preferred, double max_speed) {
  Vec2 result;
  const std::size_t failed = solve_2d(lines, max_speed, preferred, false, result);
  if (failed < lines.size()) solve_3d(lines, failed, max_speed, result);
  return clamp_velocity(result, max_speed);
}

Vec2 orca_velocity(const AgentState& agent, std::span<const AgentState> neighbors, double dt,
                   const OrcaParams& params) {
  const Vec2 preferred = preferred_velocity(agent.position, agent.goal, agent.max_speed, dt);
  if (neighbors.empty()) return preferred;
  const auto lines = orca_lines(agent, neighbors, dt, params);
  return solve_orca(lines, preferred, agent.max_speed);
}

}  // namespace crowdnav
