#pragma once

#include "crowdnav/conformal.hpp"
#include "crowdnav/prediction.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

struct MpcConfig {
  int horizon = 5;  // steps; must not exceed the prediction horizon
  int samples = 512;
  double goal_weight = 1.0;
  double collision_weight = 10.0;
  double uncertainty_weight = 2.0;
  // Fraction of candidates that hold one velocity over the whole horizon; the
  // rest draw an independent velocity per step.
  double constant_fraction = 0.5;

  void validate() const;
};

struct MpcResult {
  Vec2 action;
  double cost = 0.0;
  // Smallest robot-to-human centre distance along the chosen rollout against
  // the predicted positions (infinity without humans).
  double clearance = 0.0;
  // Smallest d - r_ego - r_h - delta_hat along the chosen rollout; negative
  // when the rollout enters an uncertainty disc.
  double margin = 0.0;
};

/// Random-shooting MPC. Candidates are scored by
///   goal_weight * terminal goal distance
///   + collision_weight * sum of hard-disc penetrations
///   + uncertainty_weight * deepest uncertainty-disc penetration
/// and the first velocity of the best one is returned, clamped. A
/// straight-to-goal candidate is always included. Ties go to the earlier
/// candidate, so the result is a pure function of the inputs and the RNG state.
MpcResult mpc_plan(const WorldState& world, const PredictionSet& prediction,
                   const UncertaintyGrid& radii, const MpcConfig& config, Rng& rng);

/// ORCA with the robot as the ego agent and every human as a neighbour.
Vec2 orca_planner(const WorldState& world);

/// Social force with the robot as the ego agent.
Vec2 sf_planner(const WorldState& world, const SocialForceParams& params);

}  // namespace crowdnav
