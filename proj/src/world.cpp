#include "crowdnav/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "crowdnav/errors.hpp"
#include "crowdnav/orca.hpp"
#include "crowdnav/social_force.hpp"

namespace crowdnav {

std::string_view to_string(Behavior b) {
  return b == Behavior::Orca ? "orca" : "social_force";
}

Behavior behavior_from_string(std::string_view s) {
  if (s == "orca" || s == "ORCA") return Behavior::Orca;
  if (s == "social_force" || s == "sf" || s == "SF") return Behavior::SocialForce;
  throw InputError("unknown behavior '" + std::string(s) + "'");
}

std::string_view to_string(Event e) {
  switch (e) {
    case Event::Running: return "running";
    case Event::ReachedGoal: return "reached_goal";
    case Event::Collision: return "collision";
    case Event::Timeout: return "timeout";
  }
  return "running";
}

Event event_from_string(std::string_view s) {
  if (s == "running") return Event::Running;
  if (s == "reached_goal") return Event::ReachedGoal;
  if (s == "collision") return Event::Collision;
  if (s == "timeout") return Event::Timeout;
  throw InputError("unknown event '" + std::string(s) + "'");
}

Vec2 preferred_velocity(const Vec2& position, const Vec2& goal, double max_speed, double dt) {
  const Vec2 to_goal = goal - position;
  const double dist = to_goal.norm();
  if (dist == 0.0) return {};
  if (dist < max_speed * dt) return to_goal / dt;
  return to_goal * (max_speed / dist);
}

AgentState as_agent(const RobotState& robot, Behavior behavior, int id) {
  AgentState a;
  a.id = id;
  a.position = robot.position;
  a.velocity = robot.velocity;
  a.radius = robot.radius;
  a.goal = robot.goal;
  a.max_speed = robot.max_speed;
  a.behavior = behavior;
  return a;
}

int WorldState::max_steps() const {
  return static_cast<int>(std::ceil(time_limit / dt - 1e-9));
}

Vec2 clamp_velocity(const Vec2& v, double v_max) {
  if (!(v_max > 0.0)) throw InputError("clamp_velocity: v_max must be positive");
  const double n = v.norm();
  if (n <= v_max) return v;
  return v * (v_max / n);
}

std::vector<Vec2> human_velocities(const WorldState& world) {
  const std::size_t n = world.humans.size();
  std::vector<Vec2> velocities(n);
  std::vector<AgentState> neighbors;
  neighbors.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const AgentState& self = world.humans[i];
    neighbors.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) neighbors.push_back(world.humans[j]);
    }
    if (world.robot_visible) neighbors.push_back(as_agent(world.robot, self.behavior));
    if (self.behavior == Behavior::Orca) {
      velocities[i] = orca_velocity(self, neighbors, world.dt, world.crowd.orca);
    } else {
      velocities[i] =
          social_force_velocity(self, neighbors, world.crowd.social_force, world.dt);
    }
  }
  return velocities;
}

namespace {

Vec2 arena_point(const WorldState& world, Rng& rng) {
  return uniform_in_box(rng, world.crowd.arena_width, world.crowd.arena_height);
}

bool arrived(const AgentState& h) { return distance(h.position, h.goal) < h.radius; }

}  // namespace

void resample_goals(WorldState& world, Rng& rng) {
  const GoalResample& spec = world.crowd.resample;
  const bool on_period = spec.period > 0 && world.step_index % spec.period == 0;
  std::bernoulli_distribution coin(std::clamp(spec.probability, 0.0, 1.0));
  for (AgentState& h : world.humans) {
    if (h.group >= 0 && !h.group_leader) continue;
    const bool draw = on_period && coin(rng);
    if (draw || arrived(h)) h.goal = arena_point(world, rng);
  }
  for (AgentState& member : world.humans) {
    if (member.group < 0 || member.group_leader) continue;
    for (const AgentState& leader : world.humans) {
      if (leader.group == member.group && leader.group_leader) {
        member.goal = leader.goal + member.goal_offset;
        break;
      }
    }
  }
}

namespace {

Vec2 move_robot(const WorldState& world, const RobotState& robot) {
  Vec2 p = robot.position + robot.velocity * world.dt;
  if (world.crowd.confine_robot) {
    const double hx = std::max(0.0, 0.5 * world.crowd.arena_width - robot.radius);
    const double hy = std::max(0.0, 0.5 * world.crowd.arena_height - robot.radius);
    p.x = std::clamp(p.x, -hx, hx);
    p.y = std::clamp(p.y, -hy, hy);
  }
  return p;
}

}  // namespace

Transition step_episode(const WorldState& world, const Vec2& robot_action) {
  if (world.terminated) throw StateError("step_episode: episode already terminated");
  if (!robot_action.finite()) throw InputError("step_episode: non-finite robot action");

  Transition tr;
  tr.next_state = world;
  WorldState& next = tr.next_state;

  const auto velocities = human_velocities(world);
  for (std::size_t i = 0; i < next.humans.size(); ++i) {
    AgentState& h = next.humans[i];
    h.velocity = velocities[i];
    h.position += h.velocity * world.dt;
  }
  RobotState& robot = next.robot;
  const double before = distance(robot.position, robot.goal);
  robot.velocity = clamp_velocity(robot_action, robot.max_speed);
  const Vec2 moved = move_robot(world, robot);
  robot.velocity = (moved - robot.position) / world.dt;
  robot.position = moved;
  const double after = distance(robot.position, robot.goal);
  tr.robot_displacement_toward_goal = before - after;

  next.step_index = world.step_index + 1;
  resample_goals(next, next.rng);

  for (std::size_t i = 0; i < next.humans.size(); ++i) {
    for (std::size_t j = i + 1; j < next.humans.size(); ++j) {
      const AgentState& a = next.humans[i];
      const AgentState& b = next.humans[j];
      if (distance(a.position, b.position) < a.radius + b.radius) ++tr.human_contacts;
    }
  }

  bool collision = false;
  for (const AgentState& h : next.humans) {
    if (distance(robot.position, h.position) < robot.radius + h.radius) {
      collision = true;
      break;
    }
  }
  if (collision) {
    tr.event = Event::Collision;
  } else if (after < robot.radius) {
    tr.event = Event::ReachedGoal;
  } else if (next.step_index >= next.max_steps()) {
    tr.event = Event::Timeout;
  } else {
    tr.event = Event::Running;
  }
  next.terminated = tr.event != Event::Running;
  return tr;
}

std::vector<std::vector<Vec2>> rollout_human_future(const WorldState& world, int steps) {
  WorldState sim = world;
  std::vector<std::vector<Vec2>> future;
  future.reserve(static_cast<std::size_t>(std::max(steps, 0)));
  for (int s = 0; s < steps; ++s) {
    const auto velocities = human_velocities(sim);
    std::vector<Vec2> positions(sim.humans.size());
    for (std::size_t i = 0; i < sim.humans.size(); ++i) {
      sim.humans[i].velocity = velocities[i];
      sim.humans[i].position += velocities[i] * sim.dt;
      positions[i] = sim.humans[i].position;
    }
    sim.robot.position = move_robot(sim, sim.robot);
    sim.step_index += 1;
    resample_goals(sim, sim.rng);
    future.push_back(std::move(positions));
  }
  return future;
}

}  // namespace crowdnav
