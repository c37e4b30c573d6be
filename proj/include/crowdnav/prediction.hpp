#pragma once

#include <vector>

#include "crowdnav/world.hpp"

namespace crowdnav {

/// K future points per human, issued at one step. Horizon indices are 1-based:
/// point(h, 1) is the one-step-ahead prediction.
class PredictionSet {
 public:
  PredictionSet() = default;
  PredictionSet(int humans, int horizon, int issued_at);

  int humans() const { return humans_; }
  int horizon() const { return horizon_; }
  int issued_at() const { return issued_at_; }

  const Vec2& point(int h, int k) const { return points_[index(h, k)]; }
  Vec2& point(int h, int k) { return points_[index(h, k)]; }

 private:
  std::size_t index(int h, int k) const {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(horizon_) +
           static_cast<std::size_t>(k - 1);
  }

  int humans_ = 0;
  int horizon_ = 0;
  int issued_at_ = 0;
  std::vector<Vec2> points_;
};

/// p_{h,k} = p_h + k*dt*v_h.
PredictionSet cv_predict(const WorldState& world, int horizon);

/// Ground-truth future (future[k-1][h] is the position k steps ahead) plus
/// isotropic Gaussian noise with per-axis standard deviation `noise_scale`.
PredictionSet noisy_oracle_predict(const WorldState& world, int horizon,
                                   const std::vector<std::vector<Vec2>>& future,
                                   double noise_scale, Rng& rng);

/// Uniform call surface so the conformal layer and the planners do not care
/// where predictions come from.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual PredictionSet predict(const WorldState& world, int horizon) = 0;
};

class ConstantVelocityPredictor final : public Predictor {
 public:
  PredictionSet predict(const WorldState& world, int horizon) override;
};

/// Simulation-only predictor that peeks at the true future and adds noise.
class NoisyOraclePredictor final : public Predictor {
 public:
  NoisyOraclePredictor(double noise_scale, std::uint64_t seed);
  PredictionSet predict(const WorldState& world, int horizon) override;

 private:
  double noise_scale_;
  Rng rng_;
};

}  // namespace crowdnav
