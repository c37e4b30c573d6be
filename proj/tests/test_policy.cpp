#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "crowdnav/errors.hpp"
#include "crowdnav/policy.hpp"
#include "crowdnav/scenario.hpp"
#include "oracles.hpp"

using namespace crowdnav;

namespace {

double range_norm(const Eigen::VectorXd& g, const std::vector<std::pair<std::size_t, std::size_t>>& ranges) {
  double total = 0.0;
  for (auto [b, e] : ranges) {
    total += g.segment(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)).squaredNorm();
  }
  return std::sqrt(total);
}

Observation random_observation(const ObservationSpec& spec, int present, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Observation o;
  for (int i = 0; i < ObservationSpec::kRobotDim; ++i) o.robot.push_back(normal(rng));
  for (int h = 0; h < spec.max_humans; ++h) {
    o.mask.push_back(h < present ? 1.0 : 0.0);
    for (int d = 0; d < spec.human_dim(); ++d) o.humans.push_back(h < present ? normal(rng) : 0.0);
  }
  return o;
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
  const LossSpec full;
  LossSpec policy_only{1.0, 0.0, 0.0};
  LossSpec reward_only{0.0, 1.0, 0.0};
  LossSpec cost_only{0.0, 0.0, 1.0};
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    for (bool shared : {true, false}) {
      const oracle::TinyNetCase c = oracle::random_tiny_net(seed, shared);
      for (const LossSpec& spec : {full, policy_only, reward_only, cost_only}) {
        const oracle::GradientCheck r = oracle::finite_difference_check(c.params, c.batch, spec);
        CHECK(r.checked == c.params.size());
        CHECK(r.worst_relative < 1e-4);
      }
    }
  }
}

TEST_CASE("zero parameters give a zero network") {
  ObservationSpec spec;
  PolicyParams params(spec, NetworkConfig{});
  params.values().setZero();
  const SinglePolicyOutput out = policy_forward(params, random_observation(spec, 3, 1));
  CHECK(out.mean.x == 0.0);
  CHECK(out.mean.y == 0.0);
  CHECK(out.reward_value == 0.0);
  CHECK(out.cost_value == 0.0);
}

TEST_CASE("permuting human blocks leaves the outputs unchanged") {
  ObservationSpec spec;
  const PolicyParams params = PolicyParams::random(spec, NetworkConfig{}, 4);
  const Observation o = random_observation(spec, 4, 5);
  Observation p = o;
  const int dim = spec.human_dim();
  const int order[] = {2, 0, 3, 1, 4};
  for (int slot = 0; slot < spec.max_humans; ++slot) {
    for (int d = 0; d < dim; ++d) {
      p.humans[static_cast<std::size_t>(slot * dim + d)] =
          o.humans[static_cast<std::size_t>(order[slot] * dim + d)];
    }
    p.mask[static_cast<std::size_t>(slot)] = o.mask[static_cast<std::size_t>(order[slot])];
  }
  const SinglePolicyOutput a = policy_forward(params, o);
  const SinglePolicyOutput b = policy_forward(params, p);
  CHECK(a.mean.x == doctest::Approx(b.mean.x).epsilon(1e-12));
  CHECK(a.mean.y == doctest::Approx(b.mean.y).epsilon(1e-12));
  CHECK(a.reward_value == doctest::Approx(b.reward_value).epsilon(1e-12));
  CHECK(a.cost_value == doctest::Approx(b.cost_value).epsilon(1e-12));
}

TEST_CASE("an extra masked slot does not change the outputs") {
  ObservationSpec small;
  small.max_humans = 3;
  ObservationSpec large = small;
  large.max_humans = 4;
  const PolicyParams a = PolicyParams::random(small, NetworkConfig{}, 8);
  PolicyParams b(large, NetworkConfig{});
  REQUIRE(a.size() == b.size());
  b.values() = a.values();
  const Observation o = random_observation(small, 2, 9);
  Observation q = o;
  q.mask.push_back(0.0);
  q.humans.resize(q.humans.size() + static_cast<std::size_t>(large.human_dim()), 0.0);
  const SinglePolicyOutput x = policy_forward(a, o);
  const SinglePolicyOutput y = policy_forward(b, q);
  CHECK(x.mean.x == doctest::Approx(y.mean.x).epsilon(1e-12));
  CHECK(x.reward_value == doctest::Approx(y.reward_value).epsilon(1e-12));
  CHECK(x.cost_value == doctest::Approx(y.cost_value).epsilon(1e-12));
}

TEST_CASE("shape mismatch is rejected") {
  ObservationSpec spec;
  const PolicyParams params = PolicyParams::random(spec, NetworkConfig{}, 1);
  Observation o = random_observation(spec, 2, 2);
  o.robot.pop_back();
  const std::vector<Observation> batch{o};
  CHECK_THROWS_AS(make_batch(batch, spec), InputError);
}

TEST_CASE("Gaussian log-density and entropy closed forms") {
  const auto [lp, ent] = log_prob_and_entropy({0.3, -0.2}, {0.0, 0.0}, {0.3, -0.2});
  CHECK(lp == doctest::Approx(-std::log(2.0 * std::numbers::pi)));
  CHECK(ent == doctest::Approx(1.0 + std::log(2.0 * std::numbers::pi)));
  double prev = lp;
  for (double d = 0.1; d < 3.0; d += 0.1) {
    const double next = log_prob_and_entropy({0.3, -0.2}, {0.0, 0.0}, {0.3 + d, -0.2 - d}).first;
    CHECK(next < prev);
    prev = next;
  }
  CHECK(log_prob_and_entropy({0, 0}, {-1.0, 0.5}, {0, 0}).second ==
        doctest::Approx(1.0 + std::log(2.0 * std::numbers::pi) - 0.5));
}

TEST_CASE("identical policies give unit ratios and l_pi = mean advantage") {
  oracle::TinyNetCase c = oracle::random_tiny_net(11, true);
  const PolicyOutput out = policy_forward(c.params, c.batch.obs);
  for (int b = 0; b < c.batch.obs.size(); ++b) {
    c.batch.old_log_prob(b) = log_prob_and_entropy({out.mean(b, 0), out.mean(b, 1)},
                                                   {out.log_std(0), out.log_std(1)},
                                                   {c.batch.actions(b, 0), c.batch.actions(b, 1)})
                                  .first;
  }
  const LossValues l = evaluate_losses(c.params, c.batch, LossSpec{});
  CHECK(l.policy == doctest::Approx(c.batch.advantage.mean()));
  CHECK(l.clip_fraction == 0.0);
  CHECK(std::abs(l.approx_kl) < 1e-12);

  c.batch.reward_target = out.reward_value;
  c.batch.cost_target = out.cost_value;
  const LossValues exact = evaluate_losses(c.params, c.batch, LossSpec{});
  CHECK(exact.reward == 0.0);
  CHECK(exact.cost == 0.0);
}

TEST_CASE("zero advantages give no actor gradient") {
  oracle::TinyNetCase c = oracle::random_tiny_net(12, false);
  c.batch.advantage.setZero();
  const LossGradient g = policy_backward(c.params, c.batch, LossSpec{1.0, 0.0, 0.0});
  CHECK(g.gradient.norm() == 0.0);
  const LossGradient full = policy_backward(c.params, c.batch, LossSpec{});
  CHECK(range_norm(full.gradient, c.params.actor_only_ranges()) == 0.0);
}

TEST_CASE("critic gradients stay inside their own parameters") {
  for (bool shared : {true, false}) {
    const oracle::TinyNetCase c = oracle::random_tiny_net(13, shared);
    const LossGradient reward = policy_backward(c.params, c.batch, LossSpec{0.0, 1.0, 0.0});
    CHECK(range_norm(reward.gradient, c.params.cost_ranges()) == 0.0);
    if (!shared) CHECK(range_norm(reward.gradient, c.params.actor_only_ranges()) == 0.0);
    const LossGradient cost = policy_backward(c.params, c.batch, LossSpec{0.0, 0.0, 1.0});
    CHECK(cost.gradient.norm() == doctest::Approx(range_norm(cost.gradient, c.params.cost_ranges())));
    CHECK(cost.gradient.norm() > 0.0);
  }
}

TEST_CASE("log-std gradient vanishes outside the clamp") {
  oracle::TinyNetCase c = oracle::random_tiny_net(14, true);
  const auto at = static_cast<Eigen::Index>(c.params.log_std_offset());
  c.params.values()(at) = 3.0;
  const PolicyOutput out = policy_forward(c.params, c.batch.obs);
  CHECK(out.log_std(0) == kMaxLogStd);
  const LossGradient g = policy_backward(c.params, c.batch, LossSpec{});
  CHECK(g.gradient(at) == 0.0);
}

TEST_CASE("checkpoint round trip") {
  ObservationSpec spec;
  spec.include_uncertainty = false;
  NetworkConfig net;
  net.hidden_width = 16;
  const PolicyParams params = PolicyParams::random(spec, net, 21);
  const auto dir = std::filesystem::temp_directory_path() / "crowdnav_test_policy";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "ckpt.json").string();
  const nlohmann::json run{{"note", "unit"}};
  save_checkpoint(path, params, run);
  const PolicyParams back = load_checkpoint(path);
  CHECK(back.observation_spec() == spec);
  CHECK(back.network_config() == net);
  CHECK(back.values() == params.values());

  nlohmann::json j = checkpoint_json(params, run);
  j["config_hash"] = "0000000000000000";
  CHECK_THROWS_AS(params_from_checkpoint(j), InputError);
  j = checkpoint_json(params, run);
  j["params"].erase(j["params"].begin());
  CHECK_THROWS_AS(params_from_checkpoint(j), InputError);
  j = checkpoint_json(params, run);
  j["format"] = "other";
  CHECK_THROWS_AS(params_from_checkpoint(j), InputError);
  CHECK_THROWS_AS(load_checkpoint((dir / "missing.json").string()), InputError);
  std::ofstream(dir / "garbage.json") << "{not json";
  CHECK_THROWS_AS(load_checkpoint((dir / "garbage.json").string()), InputError);
}

TEST_CASE("encoded observations drive the network on real scenes") {
  const WorldState w = spawn_scenario(ScenarioConfig::desk(), 3);
  ObservationSpec spec;
  const PredictionSet p = cv_predict(w, spec.horizon);
  const Observation o = encode_observation(w, p, UncertaintyGrid(5, 5, 0.2), spec);
  const SinglePolicyOutput out = policy_forward(PolicyParams::random(spec, NetworkConfig{}, 2), o);
  CHECK(out.mean.finite());
  CHECK(std::isfinite(out.reward_value));
  CHECK(std::isfinite(out.cost_value));
}

TEST_CASE("observation encoding") {
  ObservationSpec spec;
  WorldState w = spawn_scenario(ScenarioConfig::desk(), 6);
  const PredictionSet p = cv_predict(w, spec.horizon);
  UncertaintyGrid radii(5, 5);
  for (int h = 0; h < 5; ++h) {
    for (int k = 1; k <= 5; ++k) radii.at(h, k) = 0.01 * (10 * h + k);
  }
  const Observation o = encode_observation(w, p, radii, spec);
  const int dim = spec.human_dim();
  for (int slot = 0; slot < 5; ++slot) {
    CHECK(o.mask[static_cast<std::size_t>(slot)] == 1.0);
    // slot holds some human h; its radii appear verbatim in order
    const double first = o.humans[static_cast<std::size_t>(slot * dim + 6 + 2 * spec.horizon)];
    const int h = static_cast<int>(std::lround(first * 100.0 - 1.0)) / 10;
    for (int k = 1; k <= 5; ++k) {
      CHECK(o.humans[static_cast<std::size_t>(slot * dim + 6 + 2 * spec.horizon + k - 1)] ==
            radii.at(h, k));
    }
  }

  SUBCASE("translation invariance") {
    WorldState moved = w;
    const Vec2 shift{2.0, -1.5};
    moved.robot.position += shift;
    moved.robot.goal += shift;
    for (AgentState& a : moved.humans) a.position += shift;
    const Observation q = encode_observation(moved, cv_predict(moved, spec.horizon), radii, spec);
    for (std::size_t i = 0; i < o.humans.size(); ++i) CHECK(q.humans[i] == doctest::Approx(o.humans[i]));
    for (std::size_t i = 0; i < o.robot.size(); ++i) CHECK(q.robot[i] == doctest::Approx(o.robot[i]));
  }

  SUBCASE("no humans") {
    WorldState empty = w;
    empty.humans.clear();
    const Observation e = encode_observation(empty, PredictionSet(0, 5, 0), UncertaintyGrid(0, 5), spec);
    for (double m : e.mask) CHECK(m == 0.0);
    for (double v : e.humans) CHECK(v == 0.0);
  }

  SUBCASE("uncertainty ablation zeroes the radius slots") {
    ObservationSpec off = spec;
    off.include_uncertainty = false;
    const Observation z = encode_observation(w, p, radii, off);
    for (int slot = 0; slot < 5; ++slot) {
      for (int k = 1; k <= 5; ++k) {
        CHECK(z.humans[static_cast<std::size_t>(slot * dim + 6 + 2 * spec.horizon + k - 1)] == 0.0);
      }
    }
  }
}
