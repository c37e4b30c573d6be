#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "crowdnav/baselines.hpp"
#include "crowdnav/errors.hpp"
#include "crowdnav/metrics.hpp"
#include "crowdnav/nav_env.hpp"
#include "crowdnav/render.hpp"
#include "crowdnav/scenario.hpp"
#include "crowdnav/trace.hpp"
#include "crowdnav/trainer.hpp"
#include "crowdnav/util.hpp"
#include "crowdnav/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace crowdnav::cli {

namespace {

ScenarioConfig resolve_scenario(const ScenarioArgs& s) {
  ScenarioConfig c = s.scenario.empty()
                         ? (s.preset == "default" ? ScenarioConfig{} : ScenarioConfig::desk())
                         : load_scenario(s.scenario);
  if (s.ood) c = make_ood_variant(c, ood_from_string(*s.ood));
  c.validate();
  return c;
}

std::string scenario_label(const ScenarioArgs& s) {
  std::string base = s.scenario.empty() ? s.preset : fs::path(s.scenario).stem().string();
  return s.ood ? base + "+" + *s.ood : base;
}

struct PolicyChoice {
  std::string name;
  std::optional<PolicyParams> params;
};

PolicyChoice parse_policy(const std::string& spec) {
  const std::string prefix = "checkpoint:";
  if (spec.rfind(prefix, 0) == 0) {
    const std::string path = spec.substr(prefix.size());
    if (path.empty()) throw UsageError("checkpoint policy needs a path");
    return {spec, load_checkpoint(path)};
  }
  if (spec == "mpc" || spec == "orca" || spec == "sf" || spec == "zero") return {spec, std::nullopt};
  throw UsageError("unknown policy '" + spec + "' (mpc | orca | sf | zero | checkpoint:<path>)");
}

class ZeroController final : public Controller {
 public:
  Vec2 act(const CrowdNavEnv&) override { return {}; }
};

ControllerFactory factory_for(const PolicyChoice& p, const ScenarioConfig& scenario) {
  if (p.params) {
    const PolicyParams params = *p.params;
    return [params] { return std::make_unique<PolicyController>(params); };
  }
  if (p.name == "mpc") return [] { return std::make_unique<MpcController>(); };
  if (p.name == "orca") return [] { return std::make_unique<OrcaController>(); };
  if (p.name == "sf") {
    const SocialForceParams sf = scenario.social_force;
    return [sf] { return std::make_unique<SfController>(sf); };
  }
  return [] { return std::make_unique<ZeroController>(); };
}

EnvConfig env_for(const ScenarioConfig& scenario, const PolicyChoice& p) {
  EnvConfig env = EnvConfig::for_scenario(scenario);
  if (p.params) {
    env.observation = p.params->observation_spec();
    if (env.observation.max_humans < scenario.human_count) {
      std::cerr << "warning: policy observes " << env.observation.max_humans << " of "
                << scenario.human_count << " humans (nearest first)\n";
    }
  }
  return env;
}

void prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory " + dir + ": " + ec.message());
}

void write_manifest(const std::string& dir, const std::string& command,
                    const std::vector<std::string>& argv, const json& config, const json& seeds,
                    const json& outputs, const std::string& started) {
  const json m = {{"command", command},
                  {"argv", argv},
                  {"version", kVersion},
                  {"config", config},
                  {"config_hash", config_hash(config)},
                  {"seeds", seeds},
                  {"outputs", outputs},
                  {"started", started},
                  {"finished", iso_timestamp()}};
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw UsageError("cannot write manifest in " + dir);
  out << m.dump(2) << '\n';
}

void print_metrics(const MetricsTable& m) {
  std::cout << "episodes " << m.episodes << "  SR " << m.sr << "  CR " << m.cr << "  TR " << m.tr
            << "  NT " << m.nt << "  PL " << m.pl << "  ITR " << m.itr << "  SD " << m.sd << '\n';
}

}  // namespace

int run_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
  const std::string started = iso_timestamp();
  const ScenarioConfig scenario = resolve_scenario(a.scenario);
  const PolicyChoice policy = parse_policy(a.policy);
  const EnvConfig env_config = env_for(scenario, policy);
  prepare_dir(a.out);

  CrowdNavEnv env(env_config, a.seed);
  auto controller = factory_for(policy, scenario)();
  std::vector<EpisodeTrace> traces;
  const std::string label = scenario_label(a.scenario);
  for (int e = 0; e < a.episodes; ++e) {
    traces.push_back(run_episode(env, *controller, episode_seed(a.seed, e), label));
  }
  const std::string trace_path = (fs::path(a.out) / "trace.jsonl").string();
  write_traces(trace_path, traces);
  print_metrics(compute_metrics(traces));
  write_manifest(a.out, "simulate", argv,
                 {{"env", env_config}, {"policy", a.policy}, {"episodes", a.episodes},
                  {"label", label}},
                 {{"seed", a.seed}}, {{"trace", trace_path}}, started);
  return 0;
}

int run_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  const std::string started = iso_timestamp();
  const ScenarioConfig scenario = resolve_scenario(a.scenario);
  EnvConfig env_config = EnvConfig::for_scenario(scenario);
  env_config.observation.include_uncertainty = !a.no_uncertainty;

  TrainerConfig tc = TrainerConfig::desk();
  if (!a.trainer_config.empty()) {
    std::ifstream in(a.trainer_config);
    if (!in) throw UsageError("cannot open trainer config: " + a.trainer_config);
    json j;
    try {
      in >> j;
      json merged = tc;
      merged.merge_patch(j);
      tc = merged.get<TrainerConfig>();
    } catch (const json::exception& e) {
      throw UsageError("malformed trainer config " + a.trainer_config + ": " + e.what());
    }
  }
  if (a.cost_limit) tc.cost_limit = *a.cost_limit;
  if (a.steps) tc.total_steps = *a.steps;
  if (a.envs) tc.envs = *a.envs;
  if (a.lr) {
    tc.actor_lr = *a.lr;
    tc.cost_lr = *a.lr / 2.0;
  }
  if (a.threads) tc.threads = *a.threads;
  if (a.freeze_lambda) {
    tc.freeze_lambda = true;
    tc.lambda_init = 0.0;
  }
  tc.validate();
  prepare_dir(a.out);

  const json run_config = {{"env", env_config}, {"trainer", tc}, {"seed", a.seed}};
  const fs::path dir(a.out);
  TrainResult result = train(
      crowd_env_factory(env_config), env_config.observation, tc, a.seed,
      [](const CurvePoint& p) {
        if (p.iteration % 20 == 0) {
          std::cerr << "iter " << p.iteration << " steps " << p.steps << " reward " << p.mean_reward
                    << " cost " << p.mean_cost << " success " << p.success_rate << " lambda "
                    << p.lambda << '\n';
        }
      },
      (dir / "diagnostic.json").string());
  save_checkpoint((dir / "checkpoint.json").string(), result.params, run_config);
  write_curve_csv((dir / "curves.csv").string(), result.curve);
  std::cout << "final-quarter cost " << tail_mean(result.curve, &CurvePoint::mean_cost)
            << "  success " << tail_mean(result.curve, &CurvePoint::success_rate) << "  lambda "
            << result.lambda << '\n';
  write_manifest(a.out, "train", argv, run_config, {{"seed", a.seed}},
                 {{"checkpoint", (dir / "checkpoint.json").string()},
                  {"curves", (dir / "curves.csv").string()}},
                 started);
  return 0;
}

int run_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv) {
  const std::string started = iso_timestamp();
  const ScenarioConfig scenario = resolve_scenario(a.scenario);
  if (a.policies.empty()) throw UsageError("evaluate needs at least one --policy");
  std::vector<PolicyChoice> choices;
  for (const std::string& p : a.policies) choices.push_back(parse_policy(p));
  const bool learned = choices.front().params.has_value();
  for (const PolicyChoice& c : choices) {
    if (c.params.has_value() != learned || (!learned && choices.size() > 1)) {
      throw UsageError("repeat --policy only with checkpoints (one per training seed)");
    }
    if (learned && c.params->observation_spec() != choices.front().params->observation_spec()) {
      throw UsageError("checkpoints disagree on the observation layout");
    }
  }

  CampaignConfig cc;
  cc.env = env_for(scenario, choices.front());
  cc.episodes_per_seed = a.episodes;
  cc.danger_window = a.danger_window;
  cc.test_seeds.clear();
  for (int s = 0; s < a.seeds; ++s) cc.test_seeds.push_back(static_cast<std::uint64_t>(s));
  cc.variants.push_back({scenario_label(a.scenario), scenario});
  for (const std::string& v : a.variants) {
    cc.variants.push_back({v, make_ood_variant(scenario, ood_from_string(v))});
  }
  std::vector<ControllerFactory> factories;
  for (const PolicyChoice& c : choices) factories.push_back(factory_for(c, scenario));

  prepare_dir(a.out);
  const auto rows = run_campaign(factories, cc);
  const std::string csv = (fs::path(a.out) / "metrics.csv").string();
  write_metrics_csv(csv, rows);
  write_metrics_csv(std::cout, rows);
  json variants = json::array();
  for (const Variant& v : cc.variants) variants.push_back({{"name", v.name}, {"scenario", v.scenario}});
  write_manifest(a.out, "evaluate", argv,
                 {{"env", cc.env}, {"policies", a.policies}, {"variants", variants},
                  {"episodes_per_seed", a.episodes}, {"danger_window", a.danger_window}},
                 {{"test_seeds", cc.test_seeds}}, {{"metrics", csv}}, started);
  return 0;
}

int run_calibrate(const CalibrateArgs& a, const std::vector<std::string>& argv) {
  const std::string started = iso_timestamp();
  const std::vector<EpisodeTrace> traces = read_traces(a.trace);
  if (traces.empty()) throw UsageError("trace has no episodes: " + a.trace);
  DtaciConfig dc;
  dc.alpha = a.alpha;
  dc.validate();
  CoverageAccumulator acc(a.horizon);
  Rng rng(a.seed);
  for (const EpisodeTrace& t : traces) {
    const int humans = static_cast<int>(t.human_radii.size());
    DtaciBank bank(humans, a.horizon, dc);
    WorldState w;
    w.dt = t.dt;
    w.humans.resize(static_cast<std::size_t>(humans));
    for (int h = 0; h < humans; ++h) w.humans[static_cast<std::size_t>(h)].radius = t.human_radii[static_cast<std::size_t>(h)];
    for (const StepRecord& s : t.steps) {
      w.step_index = s.step;
      for (int h = 0; h < humans; ++h) {
        w.humans[static_cast<std::size_t>(h)].position = s.human_positions[static_cast<std::size_t>(h)];
        w.humans[static_cast<std::size_t>(h)].velocity = s.human_velocities[static_cast<std::size_t>(h)];
      }
      acc.add(bank.advance(w));
      PredictionSet pred = cv_predict(w, a.horizon);
      UncertaintyGrid radii = bank.query(rng, QueryMode::Sampled);
      bank.issue(std::move(pred), std::move(radii));
    }
  }
  const std::vector<double> coverage = acc.report();
  const fs::path parent = fs::absolute(a.out).parent_path();
  prepare_dir(parent.string());
  std::ofstream out(a.out);
  if (!out) throw UsageError("cannot write " + a.out);
  out << "k,coverage,samples\n";
  for (int k = 1; k <= a.horizon; ++k) {
    out << k << ',' << coverage[static_cast<std::size_t>(k - 1)] << ',' << acc.total(k) << '\n';
    std::cout << "k=" << k << " coverage " << coverage[static_cast<std::size_t>(k - 1)] << " ("
              << acc.total(k) << " samples)\n";
  }
  write_manifest(parent.string(), "calibrate", argv,
                 {{"trace", a.trace}, {"alpha", a.alpha}, {"horizon", a.horizon}},
                 {{"seed", a.seed}}, {{"coverage", a.out}}, started);
  return 0;
}

int run_render(const RenderArgs& a, const std::vector<std::string>& argv) {
  const std::string started = iso_timestamp();
  const std::vector<EpisodeTrace> traces = read_traces(a.trace);
  if (a.episode < 0 || static_cast<std::size_t>(a.episode) >= traces.size()) {
    throw UsageError("episode index out of range: trace has " + std::to_string(traces.size()) +
                     " episodes");
  }
  const std::size_t frames = render_trace(traces[static_cast<std::size_t>(a.episode)], a.out);
  std::cout << "wrote " << frames << " frames to " << a.out << '\n';
  write_manifest(a.out, "render", argv, {{"trace", a.trace}, {"episode", a.episode}}, json::object(),
                 {{"frames", frames}, {"dir", a.out}}, started);
  return 0;
}

}  // namespace crowdnav::cli
