#include "crowdnav/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>

#include "crowdnav/errors.hpp"
#include "crowdnav/util.hpp"

namespace crowdnav {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

Event EpisodeTrace::terminal_event() const {
  return steps.empty() ? Event::Running : steps.back().event;
}

double EpisodeTrace::path_length() const {
  double total = 0.0;
  Vec2 prev = robot_start;
  for (const StepRecord& s : steps) {
    total += distance(prev, s.robot_position);
    prev = s.robot_position;
  }
  return total;
}

void EpisodeTrace::validate() const {
  if (steps.empty()) throw StateError("trace has no steps");
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    if (steps[i].event != Event::Running) {
      throw StateError("trace has a terminal event before its last step");
    }
  }
  if (steps.back().event == Event::Running) throw StateError("trace has no terminal event");
}

DangerResult danger_check(const Vec2& robot_pos, double robot_radius,
                          std::span<const Vec2> current, std::span<const std::vector<Vec2>> future,
                          std::span<const double> radii) {
  DangerResult r;
  for (const auto& positions : future) {
    for (std::size_t h = 0; h < positions.size() && h < radii.size(); ++h) {
      if (distance(robot_pos, positions[h]) < robot_radius + radii[h]) r.flag = true;
    }
  }
  if (!r.flag) {
    r.min_distance = kNaN;
    return r;
  }
  r.min_distance = std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < current.size() && h < radii.size(); ++h) {
    r.min_distance =
        std::min(r.min_distance, distance(robot_pos, current[h]) - robot_radius - radii[h]);
  }
  if (!std::isfinite(r.min_distance)) r.min_distance = kNaN;
  return r;
}

void annotate_danger(EpisodeTrace& trace, int window) {
  if (window < 0) throw InputError("danger window must be non-negative");
  const std::size_t n = trace.steps.size();
  std::vector<std::vector<Vec2>> future;
  for (std::size_t i = 0; i < n; ++i) {
    future.clear();
    for (std::size_t w = 1; w <= static_cast<std::size_t>(window) && i + w < n; ++w) {
      future.push_back(trace.steps[i + w].human_positions);
    }
    StepRecord& s = trace.steps[i];
    const DangerResult d = danger_check(s.robot_position, trace.robot_radius, s.human_positions,
                                        future, trace.human_radii);
    s.danger = d.flag;
    s.danger_distance = d.min_distance;
  }
}

MetricsTable compute_metrics(std::span<const EpisodeTrace> traces) {
  if (traces.empty()) throw InputError("compute_metrics: empty trace set");
  MetricsTable m;
  const int n = static_cast<int>(traces.size());
  int success = 0;
  int collision = 0;
  double success_time = 0.0;
  double path = 0.0;
  double itr = 0.0;
  double sd_sum = 0.0;
  int sd_count = 0;
  for (const EpisodeTrace& t : traces) {
    const Event e = t.terminal_event();
    if (e == Event::ReachedGoal) {
      ++success;
      success_time += t.duration();
    } else if (e == Event::Collision) {
      ++collision;
    }
    path += t.path_length();
    int danger = 0;
    for (const StepRecord& s : t.steps) {
      if (!s.danger) continue;
      ++danger;
      if (std::isfinite(s.danger_distance)) {
        sd_sum += s.danger_distance;
        ++sd_count;
      }
    }
    if (!t.steps.empty()) itr += static_cast<double>(danger) / static_cast<double>(t.steps.size());
  }
  m.episodes = n;
  m.sr = static_cast<double>(success) / n;
  m.cr = static_cast<double>(collision) / n;
  m.tr = static_cast<double>(n - success - collision) / n;
  m.nt = success > 0 ? success_time / success : kNaN;
  m.pl = path / n;
  m.itr = itr / n;
  m.sd = sd_count > 0 ? sd_sum / sd_count : kNaN;
  return m;
}

PolicyController::PolicyController(PolicyParams params, bool stochastic)
    : params_(std::move(params)), stochastic_(stochastic) {}

void PolicyController::begin_episode(std::uint64_t episode_seed) {
  rng_.seed(mix_seed(episode_seed, 77));
}

Vec2 PolicyController::act(const CrowdNavEnv& env) {
  const Observation& obs = env.observation();
  const SinglePolicyOutput out = policy_forward(params_, obs);
  Vec2 a = out.mean;
  if (stochastic_) {
    std::normal_distribution<double> normal(0.0, 1.0);
    a.x += std::exp(out.log_std.x) * normal(rng_);
    a.y += std::exp(out.log_std.y) * normal(rng_);
  }
  return obs.frame.to_world_vector(a);
}

MpcController::MpcController(MpcConfig config) : config_(config) { config_.validate(); }

void MpcController::begin_episode(std::uint64_t episode_seed) {
  rng_.seed(mix_seed(episode_seed, 78));
}

Vec2 MpcController::act(const CrowdNavEnv& env) {
  return mpc_plan(env.world(), env.prediction(), env.radii(), config_, rng_).action;
}

Vec2 OrcaController::act(const CrowdNavEnv& env) { return orca_planner(env.world()); }

Vec2 SfController::act(const CrowdNavEnv& env) { return sf_planner(env.world(), params_); }

EpisodeTrace run_episode(CrowdNavEnv& env, Controller& controller, std::uint64_t episode_seed,
                         const std::string& label, int danger_window) {
  env.reset_episode(episode_seed);
  controller.begin_episode(episode_seed);
  const WorldState& w0 = env.world();
  EpisodeTrace trace;
  trace.scenario = label;
  trace.seed = episode_seed;
  trace.config_hash = config_hash(nlohmann::json(env.config()));
  trace.dt = w0.dt;
  trace.arena_width = w0.crowd.arena_width;
  trace.arena_height = w0.crowd.arena_height;
  trace.robot_radius = w0.robot.radius;
  trace.robot_start = w0.robot.position;
  trace.robot_goal = w0.robot.goal;
  trace.horizon = env.prediction().horizon();
  for (const AgentState& h : w0.humans) {
    trace.human_radii.push_back(h.radius);
    trace.human_start.push_back(h.position);
  }

  while (!env.done()) {
    const Vec2 action = controller.act(env);
    const NavStep step = env.step(action);
    const WorldState& w = env.world();
    StepRecord rec;
    rec.step = w.step_index;
    rec.robot_position = w.robot.position;
    rec.robot_velocity = w.robot.velocity;
    rec.action = action;
    for (const AgentState& h : w.humans) {
      rec.human_positions.push_back(h.position);
      rec.human_velocities.push_back(h.velocity);
    }
    rec.event = step.event;
    rec.reward = step.reward;
    rec.cost = step.cost;
    rec.intrusion = step.intrusion;
    const PredictionSet& p = env.prediction();
    rec.predictions.reserve(static_cast<std::size_t>(p.humans() * p.horizon()));
    for (int h = 0; h < p.humans(); ++h) {
      for (int k = 1; k <= p.horizon(); ++k) rec.predictions.push_back(p.point(h, k));
    }
    rec.radii = env.radii().values();
    trace.steps.push_back(std::move(rec));
  }
  annotate_danger(trace, danger_window);
  return trace;
}

std::uint64_t episode_seed(std::uint64_t test_seed, int episode) {
  return mix_seed(test_seed, 0x5EED0000ull + static_cast<std::uint64_t>(episode));
}

namespace {

struct Column {
  const char* name;
  double MetricsTable::*field;
};

constexpr Column kColumns[] = {{"SR", &MetricsTable::sr}, {"CR", &MetricsTable::cr},
                               {"TR", &MetricsTable::tr}, {"NT", &MetricsTable::nt},
                               {"PL", &MetricsTable::pl}, {"ITR", &MetricsTable::itr},
                               {"SD", &MetricsTable::sd}};

void aggregate(CampaignRow& row) {
  const auto& tables = row.per_policy;
  row.mean.episodes = 0;
  for (const MetricsTable& t : tables) row.mean.episodes += t.episodes;
  row.std.episodes = row.mean.episodes;
  for (const Column& c : kColumns) {
    double sum = 0.0;
    int count = 0;
    for (const MetricsTable& t : tables) {
      if (std::isfinite(t.*c.field)) {
        sum += t.*c.field;
        ++count;
      }
    }
    const double mean = count > 0 ? sum / count : kNaN;
    double var = 0.0;
    for (const MetricsTable& t : tables) {
      if (std::isfinite(t.*c.field)) var += (t.*c.field - mean) * (t.*c.field - mean);
    }
    row.mean.*c.field = mean;
    row.std.*c.field = count > 1 ? std::sqrt(var / (count - 1)) : (count == 1 ? 0.0 : kNaN);
  }
}

}  // namespace

std::vector<CampaignRow> run_campaign(std::span<const ControllerFactory> policies,
                                      const CampaignConfig& config) {
  if (policies.empty()) throw InputError("run_campaign: no policies");
  if (config.episodes_per_seed < 1 || config.test_seeds.empty()) {
    throw InputError("run_campaign: need at least one test seed and one episode");
  }
  std::vector<CampaignRow> rows;
  for (const Variant& v : config.variants) {
    CampaignRow row;
    row.variant = v.name;
    EnvConfig env_config = config.env;
    env_config.scenario = v.scenario;
    for (const ControllerFactory& make : policies) {
      std::unique_ptr<Controller> controller = make();
      CrowdNavEnv env(env_config, 0);
      std::vector<EpisodeTrace> traces;
      for (const std::uint64_t s : config.test_seeds) {
        for (int e = 0; e < config.episodes_per_seed; ++e) {
          traces.push_back(run_episode(env, *controller, episode_seed(s, e), v.name,
                                       config.danger_window));
          // Keep only what the metrics need.
          for (StepRecord& r : traces.back().steps) {
            r.predictions.clear();
            r.radii.clear();
            r.human_velocities.clear();
          }
        }
      }
      row.per_policy.push_back(compute_metrics(traces));
    }
    aggregate(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_metrics_csv(std::ostream& out, std::span<const CampaignRow> rows) {
  out << "variant";
  for (const Column& c : kColumns) out << ',' << c.name;
  for (const Column& c : kColumns) out << ",std_" << c.name;
  out << ",episodes\n";
  out << std::setprecision(10);
  auto put = [&](double v) {
    out << ',';
    if (std::isfinite(v)) {
      out << v;
    } else {
      out << "nan";
    }
  };
  for (const CampaignRow& r : rows) {
    out << r.variant;
    for (const Column& c : kColumns) put(r.mean.*c.field);
    for (const Column& c : kColumns) put(r.std.*c.field);
    out << ',' << r.mean.episodes << '\n';
  }
}

void write_metrics_csv(const std::string& path, std::span<const CampaignRow> rows) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write metrics: " + path);
  write_metrics_csv(out, rows);
}

}  // namespace crowdnav
