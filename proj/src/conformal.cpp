#include "crowdnav/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "crowdnav/errors.hpp"

namespace crowdnav {

double DtaciConfig::initial_estimate(int k) const {
  if (k >= 1 && static_cast<std::size_t>(k) <= initial_estimates.size()) {
    return initial_estimates[static_cast<std::size_t>(k - 1)];
  }
  return 0.1 * k;
}

void DtaciConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("dtaci: alpha must be in (0,1)");
  if (learning_rates.empty()) throw InputError("dtaci: need at least one learning rate");
  for (double g : learning_rates) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw InputError("dtaci: learning rates must be >= 0");
  }
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw InputError("dtaci: sigma must be in [0,1]");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InputError("dtaci: eta must be >= 0");
}

std::optional<double> realized_error(const WorldState& current, const PredictionSet& issued,
                                     int h, int k) {
  if (k < 1 || k > issued.horizon()) return std::nullopt;
  if (issued.issued_at() != current.step_index - k) return std::nullopt;
  if (h < 0 || h >= issued.humans() || h >= static_cast<int>(current.humans.size())) {
    return std::nullopt;
  }
  return distance(current.humans[static_cast<std::size_t>(h)].position, issued.point(h, k));
}

double pinball_loss(double realized, double estimate, double alpha) {
  const double residual = realized - estimate;
  return residual >= 0.0 ? alpha * residual : (alpha - 1.0) * residual;
}

DtaciBank::DtaciBank(int humans, int horizon, DtaciConfig config)
    : humans_(humans), horizon_(horizon), config_(std::move(config)) {
  config_.validate();
  if (humans < 0 || horizon < 1) throw InputError("DtaciBank: bad grid shape");
  const int m_count = experts();
  const std::size_t cells = static_cast<std::size_t>(humans) * static_cast<std::size_t>(horizon);
  estimates_.resize(cells * static_cast<std::size_t>(m_count));
  weights_.assign(estimates_.size(), 1.0 / m_count);
  probabilities_.assign(estimates_.size(), 1.0 / m_count);
  for (int h = 0; h < humans; ++h) {
    for (int k = 1; k <= horizon; ++k) {
      for (int m = 0; m < m_count; ++m) estimates_[index(h, k, m)] = config_.initial_estimate(k);
    }
  }
  scratch_.resize(static_cast<std::size_t>(m_count));
}

void DtaciBank::set_cell(int h, int k, std::span<const double> estimates,
                         std::span<const double> weights) {
  const int m_count = experts();
  if (static_cast<int>(estimates.size()) != m_count || static_cast<int>(weights.size()) != m_count) {
    throw InputError("DtaciBank::set_cell: expected one value per estimator");
  }
  double total = 0.0;
  for (int m = 0; m < m_count; ++m) total += weights[static_cast<std::size_t>(m)];
  for (int m = 0; m < m_count; ++m) {
    const auto i = index(h, k, m);
    estimates_[i] = estimates[static_cast<std::size_t>(m)];
    weights_[i] = weights[static_cast<std::size_t>(m)];
    probabilities_[i] = weights_[i] / total;
  }
}

void DtaciBank::update_cell(int h, int k, double realized, std::span<const double> reference) {
  if (!std::isfinite(realized)) throw InputError("DtaciBank::update: non-finite realized error");
  const int m_count = experts();
  const double alpha = config_.alpha;
  if (!reference.empty() && static_cast<int>(reference.size()) != m_count) {
    throw InputError("DtaciBank::update: expected one reference estimate per estimator");
  }
  auto prior = [&](int m) {
    return reference.empty() ? estimates_[index(h, k, m)] : reference[static_cast<std::size_t>(m)];
  };

  // Losses of the estimates that were in force when the error materialised.
  double min_loss = std::numeric_limits<double>::infinity();
  for (int m = 0; m < m_count; ++m) {
    const double loss = pinball_loss(realized, prior(m), alpha);
    scratch_[static_cast<std::size_t>(m)] = loss;
    min_loss = std::min(min_loss, loss);
  }

  for (int m = 0; m < m_count; ++m) {
    const double err = prior(m) < realized ? 1.0 : 0.0;
    double& est = estimates_[index(h, k, m)];
    est -= config_.learning_rates[static_cast<std::size_t>(m)] * (alpha - err);
    est = std::max(est, 0.0);
  }

  // Shifting by the smallest loss leaves the normalised weights unchanged and
  // keeps exp() away from underflow.
  double norm = 0.0;
  for (int m = 0; m < m_count; ++m) {
    double& s = scratch_[static_cast<std::size_t>(m)];
    s = weights_[index(h, k, m)] * std::exp(-config_.eta * (s - min_loss));
    norm += s;
  }
  const double sigma = config_.sigma;
  double total = 0.0;
  for (int m = 0; m < m_count; ++m) {
    double& w = weights_[index(h, k, m)];
    w = (1.0 - sigma) * scratch_[static_cast<std::size_t>(m)] / norm + sigma / m_count;
    total += w;
  }
  for (int m = 0; m < m_count; ++m) {
    probabilities_[index(h, k, m)] = weights_[index(h, k, m)] / total;
  }
}

void DtaciBank::update(std::span<const ErrorSample> samples) {
  for (const ErrorSample& s : samples) {
    if (!std::isfinite(s.realized)) throw InputError("DtaciBank::update: non-finite realized error");
  }
  for (const ErrorSample& s : samples) update_cell(s.human, s.horizon, s.realized);
}

UncertaintyGrid DtaciBank::query(Rng& rng, QueryMode mode) const {
  UncertaintyGrid grid(humans_, horizon_);
  const int m_count = experts();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int h = 0; h < humans_; ++h) {
    for (int k = 1; k <= horizon_; ++k) {
      double value = 0.0;
      if (mode == QueryMode::Expected) {
        for (int m = 0; m < m_count; ++m) {
          value += probabilities_[index(h, k, m)] * estimates_[index(h, k, m)];
        }
      } else {
        const double u = unit(rng);
        double cumulative = 0.0;
        int chosen = m_count - 1;
        for (int m = 0; m < m_count; ++m) {
          cumulative += probabilities_[index(h, k, m)];
          if (u < cumulative) {
            chosen = m;
            break;
          }
        }
        value = estimates_[index(h, k, chosen)];
      }
      grid.at(h, k) = std::max(value, 0.0);
    }
  }
  return grid;
}

std::vector<ErrorSample> DtaciBank::observe(const WorldState& world) const {
  std::vector<ErrorSample> out;
  for (const auto& [prediction, radii, estimates] : history_) {
    const int lag = world.step_index - prediction.issued_at();
    if (lag < 1 || lag > horizon_ || lag > prediction.horizon()) continue;
    const int n = std::min(prediction.humans(), humans_);
    for (int h = 0; h < n; ++h) {
      if (const auto err = realized_error(world, prediction, h, lag)) {
        out.push_back({h, lag, *err, radii.at(h, lag)});
      }
    }
  }
  return out;
}

void DtaciBank::issue(PredictionSet prediction, UncertaintyGrid radii) {
  history_.push_back({std::move(prediction), std::move(radii),
                      config_.lagged_feedback ? estimates_ : std::vector<double>{}});
  while (static_cast<int>(history_.size()) > horizon_) history_.pop_front();
}

std::vector<ErrorSample> DtaciBank::advance(const WorldState& world) {
  auto samples = observe(world);
  for (const ErrorSample& s : samples) {
    if (!std::isfinite(s.realized)) throw InputError("DtaciBank::update: non-finite realized error");
  }
  const auto m_count = static_cast<std::size_t>(experts());
  for (const ErrorSample& s : samples) {
    std::span<const double> reference;
    if (config_.lagged_feedback) {
      for (const Issued& rec : history_) {
        if (rec.prediction.issued_at() == world.step_index - s.horizon && !rec.estimates.empty()) {
          reference = std::span<const double>(rec.estimates).subspan(index(s.human, s.horizon, 0), m_count);
        }
      }
    }
    update_cell(s.human, s.horizon, s.realized, reference);
  }
  return samples;
}

std::vector<double> coverage_report(
    const std::vector<std::vector<std::pair<double, double>>>& samples_by_horizon) {
  if (samples_by_horizon.empty()) throw InputError("coverage_report: empty trace");
  std::vector<double> out;
  out.reserve(samples_by_horizon.size());
  for (std::size_t k = 0; k < samples_by_horizon.size(); ++k) {
    const auto& trace = samples_by_horizon[k];
    if (trace.empty()) {
      throw InputError("coverage_report: no samples for horizon " + std::to_string(k + 1));
    }
    std::size_t covered = 0;
    for (const auto& [realized, radius] : trace) covered += realized <= radius ? 1 : 0;
    out.push_back(static_cast<double>(covered) / static_cast<double>(trace.size()));
  }
  return out;
}

void CoverageAccumulator::add(std::span<const ErrorSample> samples) {
  for (const ErrorSample& s : samples) {
    if (s.horizon < 1 || s.horizon > static_cast<int>(total_.size())) continue;
    const auto k = static_cast<std::size_t>(s.horizon - 1);
    ++total_[k];
    if (s.realized <= s.issued_radius) ++covered_[k];
  }
}

std::vector<double> CoverageAccumulator::report() const {
  std::vector<double> out;
  for (std::size_t k = 0; k < total_.size(); ++k) {
    if (total_[k] == 0) {
      throw InputError("coverage_report: no samples for horizon " + std::to_string(k + 1));
    }
    out.push_back(static_cast<double>(covered_[k]) / static_cast<double>(total_[k]));
  }
  if (out.empty()) throw InputError("coverage_report: empty trace");
  return out;
}

}  // namespace crowdnav
