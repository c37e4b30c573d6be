#pragma once

#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "crowdnav/prediction.hpp"

namespace crowdnav {

/// H x K grid of uncertainty radii; horizon index is 1-based like PredictionSet.
class UncertaintyGrid {
 public:
  UncertaintyGrid() = default;
  UncertaintyGrid(int humans, int horizon, double fill = 0.0)
      : humans_(humans),
        horizon_(horizon),
        values_(static_cast<std::size_t>(humans) * static_cast<std::size_t>(horizon), fill) {}

  int humans() const { return humans_; }
  int horizon() const { return horizon_; }
  double at(int h, int k) const { return values_[index(h, k)]; }
  double& at(int h, int k) { return values_[index(h, k)]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t index(int h, int k) const {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(horizon_) +
           static_cast<std::size_t>(k - 1);
  }
  int humans_ = 0;
  int horizon_ = 0;
  std::vector<double> values_;
};

enum class QueryMode { Sampled, Expected };

struct DtaciConfig {
  double alpha = 0.1;
  std::vector<double> learning_rates{0.05, 0.1, 0.2};
  // Starting estimate for horizon k is initial_estimates[k-1]; horizons past
  // the end of the list start at 0.1*k.
  std::vector<double> initial_estimates{0.1, 0.2, 0.3, 0.4, 0.5};
  double sigma = 0.05;
  double eta = 10.0;
  // Score a k-step error against the estimates that were current when that
  // prediction was issued, rather than the latest ones.
  bool lagged_feedback = true;

  double initial_estimate(int k) const;
  void validate() const;
};

/// One realised prediction error: the k-step prediction made for human h at
/// t-k against the position at t, next to the radius that was issued with it.
struct ErrorSample {
  int human = 0;
  int horizon = 0;
  double realized = 0.0;
  double issued_radius = 0.0;
};

/// delta_{h,k}(t) = |p_h(t) - p_{h,k}(t-k)|. Empty when `issued` was not made
/// exactly k steps before `current` (the lag is not yet measurable).
std::optional<double> realized_error(const WorldState& current, const PredictionSet& issued,
                                     int h, int k);

/// Quantile (pinball) loss; its minimiser is the (1-alpha) quantile.
double pinball_loss(double realized, double estimate, double alpha);

/// Online quantile trackers for every (human, horizon) cell, each a bank of M
/// estimators with different learning rates mixed by exponential weights.
class DtaciBank {
 public:
  DtaciBank(int humans, int horizon, DtaciConfig config = {});

  int humans() const { return humans_; }
  int horizon() const { return horizon_; }
  int experts() const { return static_cast<int>(config_.learning_rates.size()); }
  const DtaciConfig& config() const { return config_; }

  double estimate(int h, int k, int m) const { return estimates_[index(h, k, m)]; }
  double weight(int h, int k, int m) const { return weights_[index(h, k, m)]; }
  double probability(int h, int k, int m) const { return probabilities_[index(h, k, m)]; }

  /// Direct state access for tests and replay.
  void set_cell(int h, int k, std::span<const double> estimates, std::span<const double> weights);

  /// Quantile step on every estimator of cell (h,k), then the exponential
  /// weight update using pinball losses of the pre-update estimates.
  /// `reference`, when given, replaces the current estimates in the miss
  /// indicator and the loss (one value per estimator).
  void update_cell(int h, int k, double realized, std::span<const double> reference = {});
  void update(std::span<const ErrorSample> samples);

  /// Sampled: one estimator per cell drawn from its probabilities.
  /// Expected: probability-weighted mean. Both clamped at zero.
  UncertaintyGrid query(Rng& rng, QueryMode mode) const;

  /// Realised errors for every lag whose prediction is in the history.
  std::vector<ErrorSample> observe(const WorldState& world) const;

  struct Issued {
    PredictionSet prediction;
    UncertaintyGrid radii;
    std::vector<double> estimates;  // snapshot, only with lagged_feedback
  };

  /// Remembers a prediction and the radii issued with it; keeps the last K.
  void issue(PredictionSet prediction, UncertaintyGrid radii);

  /// observe + update.
  std::vector<ErrorSample> advance(const WorldState& world);

  const std::deque<Issued>& history() const { return history_; }

 private:
  std::size_t index(int h, int k, int m) const {
    return (static_cast<std::size_t>(h) * static_cast<std::size_t>(horizon_) +
            static_cast<std::size_t>(k - 1)) *
               static_cast<std::size_t>(experts()) +
           static_cast<std::size_t>(m);
  }

  int humans_;
  int horizon_;
  DtaciConfig config_;
  std::vector<double> estimates_;
  std::vector<double> weights_;
  std::vector<double> probabilities_;
  std::deque<Issued> history_;
  std::vector<double> scratch_;
};

/// Per-horizon fraction of samples with realized <= issued radius.
/// `samples_by_horizon[k-1]` holds the (realized, radius) pairs for horizon k.
/// Throws InputError if any horizon has no samples.
std::vector<double> coverage_report(
    const std::vector<std::vector<std::pair<double, double>>>& samples_by_horizon);

/// Running per-horizon coverage counts over ErrorSamples.
class CoverageAccumulator {
 public:
  explicit CoverageAccumulator(int horizon)
      : covered_(static_cast<std::size_t>(horizon), 0), total_(static_cast<std::size_t>(horizon), 0) {}
  void add(std::span<const ErrorSample> samples);
  std::size_t total(int k) const { return total_[static_cast<std::size_t>(k - 1)]; }
  /// Throws InputError if any horizon has no samples.
  std::vector<double> report() const;

 private:
  std::vector<std::size_t> covered_;
  std::vector<std::size_t> total_;
};

}  // namespace crowdnav
