#include "crowdnav/baselines.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "crowdnav/errors.hpp"
#include "crowdnav/orca.hpp"
#include "crowdnav/social_force.hpp"

namespace crowdnav {

void MpcConfig::validate() const {
  if (horizon < 1 || samples < 1) throw InputError("mpc: horizon and samples must be >= 1");
  if (goal_weight < 0.0 || collision_weight < 0.0 || uncertainty_weight < 0.0) {
    throw InputError("mpc: weights must be non-negative");
  }
  if (constant_fraction < 0.0 || constant_fraction > 1.0) {
    throw InputError("mpc: constant_fraction must lie in [0, 1]");
  }
}

namespace {

Vec2 sample_in_disc(Rng& rng, double radius) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = radius * std::sqrt(u(rng));
  const double a = 2.0 * std::numbers::pi * u(rng);
  return {r * std::cos(a), r * std::sin(a)};
}

struct Score {
  double cost = 0.0;
  double clearance = std::numeric_limits<double>::infinity();
  double margin = std::numeric_limits<double>::infinity();
};

Score score(const WorldState& world, const PredictionSet& prediction, const UncertaintyGrid& radii,
            const MpcConfig& config, const std::vector<Vec2>& seq) {
  const RobotState& robot = world.robot;
  Score s;
  double penetration = 0.0;
  Vec2 p = robot.position;
  for (int t = 1; t <= config.horizon; ++t) {
    p += seq[static_cast<std::size_t>(t - 1)] * world.dt;
    for (int h = 0; h < prediction.humans(); ++h) {
      const double d = distance(p, prediction.point(h, t));
      const double hard = robot.radius + world.humans[static_cast<std::size_t>(h)].radius;
      penetration += std::max(0.0, hard - d);
      s.clearance = std::min(s.clearance, d);
      s.margin = std::min(s.margin, d - hard - radii.at(h, t));
    }
  }
  const double peak = std::isfinite(s.margin) ? std::max(0.0, -s.margin) : 0.0;
  s.cost = config.goal_weight * distance(p, robot.goal) + config.collision_weight * penetration +
           config.uncertainty_weight * peak;
  return s;
}

}  // namespace

MpcResult mpc_plan(const WorldState& world, const PredictionSet& prediction,
                   const UncertaintyGrid& radii, const MpcConfig& config, Rng& rng) {
  config.validate();
  const int n_humans = static_cast<int>(world.humans.size());
  if (prediction.humans() != n_humans || radii.humans() != n_humans) {
    throw InputError("mpc_plan: prediction/uncertainty shapes do not match the world");
  }
  if (n_humans > 0 && (prediction.horizon() < config.horizon || radii.horizon() < config.horizon)) {
    throw InputError("mpc_plan: prediction horizon shorter than the MPC horizon");
  }
  const RobotState& robot = world.robot;
  const double vmax = robot.max_speed;
  const std::size_t n = static_cast<std::size_t>(config.horizon);

  std::vector<Vec2> seq(n);
  std::vector<Vec2> best_seq;
  Score best;
  best.cost = std::numeric_limits<double>::infinity();

  // Straight to the goal, slowing down so the horizon ends on it.
  const Vec2 to_goal = robot.goal - robot.position;
  const double d_goal = to_goal.norm();
  const double speed = std::min(vmax, d_goal / (config.horizon * world.dt));
  const Vec2 straight = d_goal > 0.0 ? to_goal * (speed / d_goal) : Vec2{};

  const int n_constant = static_cast<int>(std::lround(config.constant_fraction * config.samples));
  for (int c = 0; c < config.samples; ++c) {
    if (c == 0) {
      std::fill(seq.begin(), seq.end(), straight);
    } else if (c < n_constant) {
      std::fill(seq.begin(), seq.end(), sample_in_disc(rng, vmax));
    } else {
      for (Vec2& v : seq) v = sample_in_disc(rng, vmax);
    }
    const Score s = score(world, prediction, radii, config, seq);
    if (s.cost < best.cost) {
      best = s;
      best_seq = seq;
    }
  }
  return {clamp_velocity(best_seq.front(), vmax), best.cost, best.clearance, best.margin};
}

Vec2 orca_planner(const WorldState& world) {
  const AgentState ego = as_agent(world.robot, Behavior::Orca);
  return clamp_velocity(orca_velocity(ego, world.humans, world.dt, world.crowd.orca),
                        world.robot.max_speed);
}

Vec2 sf_planner(const WorldState& world, const SocialForceParams& params) {
  const AgentState ego = as_agent(world.robot, Behavior::SocialForce);
  return social_force_velocity(ego, world.humans, params, world.dt);
}

}  // namespace crowdnav
