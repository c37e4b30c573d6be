#pragma once

#include <stdexcept>
#include <string>

namespace crowdnav {

/// Malformed or out-of-range argument (non-finite action, bad shapes, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation called in a state that forbids it, e.g. stepping a finished episode.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Scenario could not be generated or loaded.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimisation produced non-finite values or otherwise diverged.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace crowdnav
