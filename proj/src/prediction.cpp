#include "crowdnav/prediction.hpp"

#include "crowdnav/errors.hpp"

namespace crowdnav {

PredictionSet::PredictionSet(int humans, int horizon, int issued_at)
    : humans_(humans),
      horizon_(horizon),
      issued_at_(issued_at),
      points_(static_cast<std::size_t>(humans) * static_cast<std::size_t>(horizon)) {
  if (horizon < 1) throw InputError("PredictionSet: horizon must be >= 1");
  if (humans < 0) throw InputError("PredictionSet: negative human count");
}

PredictionSet cv_predict(const WorldState& world, int horizon) {
  const int n = static_cast<int>(world.humans.size());
  PredictionSet out(n, horizon, world.step_index);
  for (int h = 0; h < n; ++h) {
    const AgentState& human = world.humans[static_cast<std::size_t>(h)];
    for (int k = 1; k <= horizon; ++k) {
      out.point(h, k) = human.position + (k * world.dt) * human.velocity;
    }
  }
  return out;
}

PredictionSet noisy_oracle_predict(const WorldState& world, int horizon,
                                   const std::vector<std::vector<Vec2>>& future,
                                   double noise_scale, Rng& rng) {
  if (static_cast<int>(future.size()) < horizon) {
    throw InputError("noisy_oracle_predict: future shorter than the prediction horizon");
  }
  const int n = static_cast<int>(world.humans.size());
  PredictionSet out(n, horizon, world.step_index);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int k = 1; k <= horizon; ++k) {
    const auto& row = future[static_cast<std::size_t>(k - 1)];
    if (static_cast<int>(row.size()) != n) {
      throw InputError("noisy_oracle_predict: future row does not match human count");
    }
    for (int h = 0; h < n; ++h) {
      Vec2 p = row[static_cast<std::size_t>(h)];
      if (noise_scale > 0.0) {
        const double dx = noise(rng);
        const double dy = noise(rng);
        p += Vec2{dx, dy} * noise_scale;
      }
      out.point(h, k) = p;
    }
  }
  return out;
}

PredictionSet ConstantVelocityPredictor::predict(const WorldState& world, int horizon) {
  return cv_predict(world, horizon);
}

NoisyOraclePredictor::NoisyOraclePredictor(double noise_scale, std::uint64_t seed)
    : noise_scale_(noise_scale), rng_(seed) {}

PredictionSet NoisyOraclePredictor::predict(const WorldState& world, int horizon) {
  return noisy_oracle_predict(world, horizon, rollout_human_future(world, horizon), noise_scale_,
                              rng_);
}

}  // namespace crowdnav
