#include "crowdnav/observation.hpp"

#include <algorithm>
#include <numeric>

#include "crowdnav/errors.hpp"

namespace crowdnav {

Observation encode_observation(const WorldState& world, const PredictionSet& prediction,
                               const UncertaintyGrid& radii, const ObservationSpec& spec) {
  const int n = static_cast<int>(world.humans.size());
  if (prediction.humans() != n || radii.humans() != n) {
    throw InputError("encode_observation: prediction/uncertainty shapes do not match the world");
  }
  if (prediction.horizon() < spec.horizon || radii.horizon() < spec.horizon) {
    throw InputError("encode_observation: prediction horizon shorter than the observation horizon");
  }

  const RobotState& robot = world.robot;
  Observation obs;
  const Vec2 to_goal = robot.goal - robot.position;
  const double goal_dist = to_goal.norm();
  obs.frame.origin = robot.position;
  if (goal_dist > 0.0) {
    obs.frame.cos = to_goal.x / goal_dist;
    obs.frame.sin = to_goal.y / goal_dist;
  }
  const Frame& f = obs.frame;

  const Vec2 v = f.to_local_vector(robot.velocity);
  const double speed = v.norm();
  const Vec2 heading = speed > 0.0 ? v / speed : Vec2{};
  const Vec2 goal = f.to_local_point(robot.goal);
  obs.robot = {v.x, v.y, heading.x, heading.y, goal.x, goal.y, goal_dist};

  const int dim = spec.human_dim();
  obs.humans.assign(static_cast<std::size_t>(spec.max_humans * dim), 0.0);
  obs.mask.assign(static_cast<std::size_t>(spec.max_humans), 0.0);

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return distance(world.humans[static_cast<std::size_t>(a)].position, robot.position) <
           distance(world.humans[static_cast<std::size_t>(b)].position, robot.position);
  });

  const int kept = std::min(n, spec.max_humans);
  for (int slot = 0; slot < kept; ++slot) {
    const int h = order[static_cast<std::size_t>(slot)];
    const AgentState& human = world.humans[static_cast<std::size_t>(h)];
    double* row = obs.humans.data() + static_cast<std::size_t>(slot * dim);
    const Vec2 p = f.to_local_point(human.position);
    const Vec2 rv = f.to_local_vector(human.velocity - robot.velocity);
    row[0] = p.x;
    row[1] = p.y;
    row[2] = rv.x;
    row[3] = rv.y;
    row[4] = human.radius;
    row[5] = p.norm() - human.radius - robot.radius;
    for (int k = 1; k <= spec.horizon; ++k) {
      const Vec2 q = f.to_local_point(prediction.point(h, k));
      row[6 + 2 * (k - 1)] = q.x;
      row[6 + 2 * (k - 1) + 1] = q.y;
      row[6 + 2 * spec.horizon + (k - 1)] = spec.include_uncertainty ? radii.at(h, k) : 0.0;
    }
    obs.mask[static_cast<std::size_t>(slot)] = 1.0;
  }
  return obs;
}

Observation empty_observation(const ObservationSpec& spec, std::vector<double> robot_block) {
  if (static_cast<int>(robot_block.size()) != ObservationSpec::kRobotDim) {
    throw InputError("empty_observation: robot block has the wrong size");
  }
  Observation obs;
  obs.robot = std::move(robot_block);
  obs.humans.assign(static_cast<std::size_t>(spec.max_humans * spec.human_dim()), 0.0);
  obs.mask.assign(static_cast<std::size_t>(spec.max_humans), 0.0);
  return obs;
}

}  // namespace crowdnav
