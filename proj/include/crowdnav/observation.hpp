#pragma once

#include <vector>

#include "crowdnav/conformal.hpp"
#include "crowdnav/prediction.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

struct ObservationSpec {
  int max_humans = 5;
  int horizon = 5;
  // When false the uncertainty slots are zeroed (no-uncertainty ablation).
  bool include_uncertainty = true;

  static constexpr int kRobotDim = 7;
  /// rel position (2), rel velocity (2), radius, surface gap, K points (2K), K radii.
  int human_dim() const { return 6 + 3 * horizon; }
  bool operator==(const ObservationSpec&) const = default;
};

/// Robot-centred frame whose x axis points at the goal. Policy actions are
/// expressed in this frame.
struct Frame {
  Vec2 origin;
  double cos = 1.0;
  double sin = 0.0;

  Vec2 to_local_point(const Vec2& p) const { return rotate(p - origin, cos, -sin); }
  Vec2 to_local_vector(const Vec2& v) const { return rotate(v, cos, -sin); }
  Vec2 to_world_vector(const Vec2& v) const { return rotate(v, cos, sin); }
};

/// Fixed-size encoding of the robot state and up to max_humans humans sorted
/// by distance. Absent humans have a zero block and mask 0.
struct Observation {
  std::vector<double> robot;   // kRobotDim
  std::vector<double> humans;  // max_humans x human_dim, row-major
  std::vector<double> mask;    // max_humans
  Frame frame;
};

/// Encodes world, predictions and uncertainty radii in the goal-aligned frame.
/// Humans beyond max_humans are dropped farthest-first.
Observation encode_observation(const WorldState& world, const PredictionSet& prediction,
                               const UncertaintyGrid& radii, const ObservationSpec& spec);

/// Robot block only; every human slot masked. Used by non-navigation tasks.
Observation empty_observation(const ObservationSpec& spec, std::vector<double> robot_block);

}  // namespace crowdnav
