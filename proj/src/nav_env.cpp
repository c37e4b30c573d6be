#include "crowdnav/nav_env.hpp"

#include <algorithm>

#include "crowdnav/errors.hpp"
#include "crowdnav/util.hpp"

namespace crowdnav {

EnvConfig EnvConfig::for_scenario(const ScenarioConfig& scenario) {
  EnvConfig c;
  c.scenario = scenario;
  c.observation.max_humans = scenario.human_count;
  return c;
}

void EnvConfig::validate() const {
  scenario.validate();
  dtaci.validate();
  if (observation.max_humans < 0 || observation.horizon < 1) {
    throw InputError("observation: max_humans must be >= 0 and horizon >= 1");
  }
  if (safety.cost_horizon < 0 || safety.cost_horizon > observation.horizon) {
    throw InputError("safety: cost_horizon must lie in [0, horizon]");
  }
  if (safety.comfort_radius < 0.0 || safety.cost_scale < 0.0) {
    throw InputError("safety: comfort_radius and cost_scale must be non-negative");
  }
  if (oracle_noise < 0.0) throw InputError("oracle_noise must be non-negative");
}

namespace {
const char* query_name(QueryMode m) { return m == QueryMode::Sampled ? "sampled" : "expected"; }
QueryMode query_from(const std::string& s) {
  if (s == "sampled") return QueryMode::Sampled;
  if (s == "expected") return QueryMode::Expected;
  throw InputError("unknown query mode: " + s);
}
}  // namespace

void to_json(nlohmann::json& j, const EnvConfig& c) {
  j = {{"scenario", c.scenario},
       {"observation",
        {{"max_humans", c.observation.max_humans},
         {"horizon", c.observation.horizon},
         {"include_uncertainty", c.observation.include_uncertainty}}},
       {"dtaci",
        {{"alpha", c.dtaci.alpha},
         {"learning_rates", c.dtaci.learning_rates},
         {"initial_estimates", c.dtaci.initial_estimates},
         {"sigma", c.dtaci.sigma},
         {"eta", c.dtaci.eta},
         {"lagged_feedback", c.dtaci.lagged_feedback},
         {"query", query_name(c.query_mode)}}},
       {"safety",
        {{"comfort_radius", c.safety.comfort_radius},
         {"cost_horizon", c.safety.cost_horizon},
         {"cost_scale", c.safety.cost_scale}}},
       {"reward",
        {{"success", c.reward.success},
         {"collision", c.reward.collision},
         {"potential_scale", c.reward.potential_scale}}},
       {"predictor", c.predictor == PredictorKind::ConstantVelocity ? "cv" : "noisy_oracle"},
       {"oracle_noise", c.oracle_noise}};
}

void from_json(const nlohmann::json& j, EnvConfig& c) {
  if (j.contains("scenario")) {
    c = EnvConfig::for_scenario(j.at("scenario").get<ScenarioConfig>());
  }
  if (j.contains("observation")) {
    const auto& o = j.at("observation");
    c.observation.max_humans = o.value("max_humans", c.observation.max_humans);
    c.observation.horizon = o.value("horizon", c.observation.horizon);
    c.observation.include_uncertainty = o.value("include_uncertainty", true);
  }
  if (j.contains("dtaci")) {
    const auto& d = j.at("dtaci");
    c.dtaci.alpha = d.value("alpha", c.dtaci.alpha);
    c.dtaci.learning_rates = d.value("learning_rates", c.dtaci.learning_rates);
    c.dtaci.initial_estimates = d.value("initial_estimates", c.dtaci.initial_estimates);
    c.dtaci.sigma = d.value("sigma", c.dtaci.sigma);
    c.dtaci.eta = d.value("eta", c.dtaci.eta);
    c.dtaci.lagged_feedback = d.value("lagged_feedback", c.dtaci.lagged_feedback);
    c.query_mode = query_from(d.value("query", std::string("sampled")));
  }
  if (j.contains("safety")) {
    const auto& s = j.at("safety");
    c.safety.comfort_radius = s.value("comfort_radius", c.safety.comfort_radius);
    c.safety.cost_horizon = s.value("cost_horizon", c.safety.cost_horizon);
    c.safety.cost_scale = s.value("cost_scale", c.safety.cost_scale);
  }
  if (j.contains("reward")) {
    const auto& r = j.at("reward");
    c.reward.success = r.value("success", c.reward.success);
    c.reward.collision = r.value("collision", c.reward.collision);
    c.reward.potential_scale = r.value("potential_scale", c.reward.potential_scale);
  }
  const std::string p = j.value("predictor", std::string("cv"));
  if (p == "cv") {
    c.predictor = PredictorKind::ConstantVelocity;
  } else if (p == "noisy_oracle") {
    c.predictor = PredictorKind::NoisyOracle;
  } else {
    throw InputError("unknown predictor: " + p);
  }
  c.oracle_noise = j.value("oracle_noise", c.oracle_noise);
}

CrowdNavEnv::CrowdNavEnv(EnvConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_stream_(mix_seed(seed, 0)), query_rng_(mix_seed(seed, 1)) {
  config_.validate();
  if (config_.predictor == PredictorKind::NoisyOracle) {
    predictor_ = std::make_unique<NoisyOraclePredictor>(config_.oracle_noise, mix_seed(seed, 2));
  } else {
    predictor_ = std::make_unique<ConstantVelocityPredictor>();
  }
  reset();
}

const Observation& CrowdNavEnv::reset() {
  reset_episode(seed_stream_());
  return obs_;
}

void CrowdNavEnv::reset_episode(std::uint64_t episode_seed) {
  episode_seed_ = episode_seed;
  world_ = spawn_scenario(config_.scenario, episode_seed);
  bank_.emplace(static_cast<int>(world_.humans.size()), config_.observation.horizon, config_.dtaci);
  refresh();
}

void CrowdNavEnv::refresh() {
  prediction_ = predictor_->predict(world_, config_.observation.horizon);
  radii_ = bank_->query(query_rng_, config_.query_mode);
  bank_->issue(prediction_, radii_);
  obs_ = encode_observation(world_, prediction_, radii_, config_.observation);
}

NavStep CrowdNavEnv::step(const Vec2& world_action) {
  Transition tr = step_episode(world_, world_action);
  world_ = std::move(tr.next_state);
  NavStep out;
  out.event = tr.event;
  out.human_contacts = tr.human_contacts;
  out.errors = bank_->advance(world_);
  refresh();
  const SafetyAreas areas = build_safety_areas(world_, prediction_, radii_, config_.safety);
  out.intrusion = max_intrusion(world_.robot.position, areas);
  out.cost = step_cost(out.intrusion, config_.safety.cost_scale);
  out.reward = step_reward(tr, config_.reward);
  return out;
}

EnvStep CrowdNavEnv::step_policy(const Vec2& policy_action) {
  const NavStep s = step(obs_.frame.to_world_vector(policy_action));
  return {s.reward, s.cost, s.event != Event::Running, s.event == Event::ReachedGoal};
}

SyntheticCmdpEnv::SyntheticCmdpEnv(const ObservationSpec& spec)
    : obs_(empty_observation(spec, std::vector<double>(ObservationSpec::kRobotDim, 0.0))) {}

EnvStep SyntheticCmdpEnv::step_policy(const Vec2& policy_action) {
  const double a = std::clamp(policy_action.x, 0.0, 1.0);
  return {a, a, true, false};
}

EnvFactory crowd_env_factory(const EnvConfig& config) {
  return [config](int, std::uint64_t seed) -> std::unique_ptr<TrainingEnv> {
    return std::make_unique<CrowdNavEnv>(config, seed);
  };
}

EnvFactory synthetic_env_factory(const ObservationSpec& spec) {
  return [spec](int, std::uint64_t) -> std::unique_ptr<TrainingEnv> {
    return std::make_unique<SyntheticCmdpEnv>(spec);
  };
}

}  // namespace crowdnav
