#include "crowdnav/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "crowdnav/errors.hpp"
#include "crowdnav/util.hpp"

namespace crowdnav {

GaeResult compute_gae(std::span<const double> signal, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double last_value, double gamma,
                      double gae_lambda) {
  const std::size_t n = signal.size();
  if (values.size() != n || dones.size() != n) {
    throw InputError("compute_gae: signal, values and dones must have equal length");
  }
  GaeResult r;
  r.advantages.assign(n, 0.0);
  r.targets.assign(n, 0.0);
  double next_value = last_value;
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = signal[i] + gamma * next_value * live - values[i];
    running = delta + gamma * gae_lambda * live * running;
    r.advantages[i] = running;
    r.targets[i] = running + values[i];
    next_value = values[i];
  }
  return r;
}

std::vector<double> combined_advantage(std::span<const double> reward_adv,
                                       std::span<const double> cost_adv, double lambda) {
  if (reward_adv.size() != cost_adv.size()) {
    throw InputError("combined_advantage: channel lengths differ");
  }
  if (lambda < 0.0) throw InputError("combined_advantage: lambda must be non-negative");
  std::vector<double> out(reward_adv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (reward_adv[i] - lambda * cost_adv[i]) / (1.0 + lambda);
  }
  return out;
}

void normalize_in_place(std::vector<double>& v) {
  if (v.empty()) return;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (const double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(v.size()));
  const double scale = sd > 1e-8 ? 1.0 / sd : 1.0;
  for (double& x : v) x = (x - mean) * scale;
}

double lambda_update(double lambda, double mean_cost, double cost_limit, double rate) {
  return std::max(0.0, lambda + rate * (mean_cost - cost_limit));
}

void TrainerConfig::validate() const {
  if (!(clip > 0.0 && clip < 1.0)) throw InputError("trainer: clip must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma <= 1.0) || !(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw InputError("trainer: gamma in (0,1] and gae_lambda in [0,1] required");
  }
  if (actor_lr <= 0.0 || cost_lr <= 0.0 || lambda_lr < 0.0 || lambda_init < 0.0) {
    throw InputError("trainer: learning rates must be positive and lambda_init >= 0");
  }
  if (epochs < 1 || minibatch < 1 || envs < 1 || steps_per_env < 1 || total_steps < 1 ||
      threads < 1) {
    throw InputError("trainer: epochs, minibatch, envs, steps_per_env, steps, threads must be >= 1");
  }
  if (cost_limit < 0.0) throw InputError("trainer: cost_limit must be non-negative");
}

TrainerConfig TrainerConfig::desk() {
  TrainerConfig c;
  c.actor_lr = 3e-4;
  c.cost_lr = 1.5e-4;
  c.lambda_lr = 0.01;
  return c;
}

void to_json(nlohmann::json& j, const TrainerConfig& c) {
  j = {{"cost_limit", c.cost_limit},
       {"gamma", c.gamma},
       {"gae_lambda", c.gae_lambda},
       {"clip", c.clip},
       {"actor_lr", c.actor_lr},
       {"cost_lr", c.cost_lr},
       {"lambda_lr", c.lambda_lr},
       {"lambda_init", c.lambda_init},
       {"freeze_lambda", c.freeze_lambda},
       {"c1", c.c1},
       {"c2", c.c2},
       {"normalize_advantages", c.normalize_advantages},
       {"max_grad_norm", c.max_grad_norm},
       {"epochs", c.epochs},
       {"minibatch", c.minibatch},
       {"envs", c.envs},
       {"steps_per_env", c.steps_per_env},
       {"total_steps", c.total_steps},
       {"network",
        {{"encoder_width", c.network.encoder_width},
         {"hidden_width", c.network.hidden_width},
         {"share_actor_reward", c.network.share_actor_reward},
         {"init_log_std", c.network.init_log_std}}}};
}

void from_json(const nlohmann::json& j, TrainerConfig& c) {
  const TrainerConfig d;
  c.cost_limit = j.value("cost_limit", d.cost_limit);
  c.gamma = j.value("gamma", d.gamma);
  c.gae_lambda = j.value("gae_lambda", d.gae_lambda);
  c.clip = j.value("clip", d.clip);
  c.actor_lr = j.value("actor_lr", d.actor_lr);
  c.cost_lr = j.value("cost_lr", d.cost_lr);
  c.lambda_lr = j.value("lambda_lr", d.lambda_lr);
  c.lambda_init = j.value("lambda_init", d.lambda_init);
  c.freeze_lambda = j.value("freeze_lambda", d.freeze_lambda);
  c.c1 = j.value("c1", d.c1);
  c.c2 = j.value("c2", d.c2);
  c.normalize_advantages = j.value("normalize_advantages", d.normalize_advantages);
  c.max_grad_norm = j.value("max_grad_norm", d.max_grad_norm);
  c.epochs = j.value("epochs", d.epochs);
  c.minibatch = j.value("minibatch", d.minibatch);
  c.envs = j.value("envs", d.envs);
  c.steps_per_env = j.value("steps_per_env", d.steps_per_env);
  c.total_steps = j.value("total_steps", d.total_steps);
  if (j.contains("network")) {
    const auto& n = j.at("network");
    c.network.encoder_width = n.value("encoder_width", d.network.encoder_width);
    c.network.hidden_width = n.value("hidden_width", d.network.hidden_width);
    c.network.share_actor_reward = n.value("share_actor_reward", d.network.share_actor_reward);
    c.network.init_log_std = n.value("init_log_std", d.network.init_log_std);
  }
}

namespace {

void write_number(std::ostream& out, double v) {
  if (std::isfinite(v)) {
    out << v;
  } else {
    out << "nan";
  }
}

}  // namespace

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "iteration,steps,episodes,mean_reward,mean_cost,success_rate,lambda,policy_loss,approx_kl\n";
  out << std::setprecision(10);
  for (const CurvePoint& p : curve) {
    out << p.iteration << ',' << p.steps << ',' << p.episodes << ',';
    write_number(out, p.mean_reward);
    out << ',';
    write_number(out, p.mean_cost);
    out << ',';
    write_number(out, p.success_rate);
    out << ',';
    write_number(out, p.lambda);
    out << ',';
    write_number(out, p.policy_loss);
    out << ',';
    write_number(out, p.approx_kl);
    out << '\n';
  }
}

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write curves: " + path);
  write_curve_csv(out, curve);
}

Adam::Adam(std::size_t size, double beta1, double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
      rate_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

void Adam::set_rate(std::size_t begin, std::size_t end, double rate) {
  rate_.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin))
      .setConstant(rate);
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= rate_.array() * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

namespace {

struct Rollout {
  std::vector<Observation> obs;  // time-major: t*N + env
  Eigen::MatrixXd actions;
  std::vector<double> log_prob, reward, cost, value_r, value_c;
  std::vector<std::uint8_t> done;
};

double grad_norm(const Eigen::VectorXd& g, const std::vector<std::uint8_t>& in_group, bool want) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (static_cast<bool>(in_group[static_cast<std::size_t>(i)]) == want) s += g(i) * g(i);
  }
  return std::sqrt(s);
}

void dump_diagnostic(const std::string& path, int iteration, double lambda,
                     const LossValues& lv, const PolicyParams& params) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) return;
  const nlohmann::json j = {
      {"iteration", iteration},
      {"lambda", lambda},
      {"losses",
       {{"policy", lv.policy}, {"reward", lv.reward}, {"cost", lv.cost}, {"total", lv.total}}},
      {"param_norm", params.values().norm()},
      {"params_finite", params.values().allFinite()}};
  out << j.dump(2) << '\n';
}

template <class F>
void parallel_for(int n, int threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  const int workers = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) f(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

TrainResult train(const EnvFactory& factory, const ObservationSpec& spec,
                  const TrainerConfig& config, std::uint64_t seed, const ProgressFn& progress,
                  const std::string& dump_path) {
  config.validate();
  const int n_env = config.envs;
  const int horizon = config.steps_per_env;
  const int batch_size = n_env * horizon;

  std::vector<std::unique_ptr<TrainingEnv>> envs;
  envs.reserve(static_cast<std::size_t>(n_env));
  for (int i = 0; i < n_env; ++i) {
    envs.push_back(factory(i, mix_seed(seed, 1000 + static_cast<std::uint64_t>(i))));
    envs.back()->reset();
  }

  TrainResult result{PolicyParams::random(spec, config.network, mix_seed(seed, 1)), {}, 0.0};
  PolicyParams& params = result.params;
  Adam adam(params.size());
  adam.set_rate(0, params.size(), config.actor_lr);
  std::vector<std::uint8_t> cost_group(params.size(), 0);
  for (const auto& [b, e] : params.cost_ranges()) {
    adam.set_rate(b, e, config.cost_lr);
    std::fill(cost_group.begin() + static_cast<std::ptrdiff_t>(b),
              cost_group.begin() + static_cast<std::ptrdiff_t>(e), 1);
  }

  Rng action_rng(mix_seed(seed, 2));
  Rng shuffle_rng(mix_seed(seed, 3));
  std::normal_distribution<double> normal(0.0, 1.0);
  double lambda = config.lambda_init;

  std::vector<double> ep_return(static_cast<std::size_t>(n_env), 0.0);
  std::vector<double> ep_cost(static_cast<std::size_t>(n_env), 0.0);
  std::vector<EnvStep> step_out(static_cast<std::size_t>(n_env));
  std::vector<Vec2> step_action(static_cast<std::size_t>(n_env));

  const LossSpec loss_spec{1.0, 1.0, 1.0, config.clip, config.c1, config.c2};
  const long long iterations = (config.total_steps + batch_size - 1) / batch_size;
  long long steps_done = 0;
  Rollout ro;

  for (long long it = 0; it < iterations; ++it) {
    ro.obs.assign(static_cast<std::size_t>(batch_size), Observation{});
    ro.actions.resize(batch_size, 2);
    ro.log_prob.assign(static_cast<std::size_t>(batch_size), 0.0);
    ro.reward = ro.cost = ro.value_r = ro.value_c = ro.log_prob;
    ro.done.assign(static_cast<std::size_t>(batch_size), 0);

    int episodes = 0;
    int successes = 0;
    double sum_return = 0.0;
    double sum_cost = 0.0;

    std::vector<Observation> current(static_cast<std::size_t>(n_env));
    for (int t = 0; t < horizon; ++t) {
      for (int i = 0; i < n_env; ++i) current[static_cast<std::size_t>(i)] = envs[static_cast<std::size_t>(i)]->observation();
      const PolicyOutput out = policy_forward(params, make_batch(current, spec));
      const double s0 = std::exp(out.log_std(0));
      const double s1 = std::exp(out.log_std(1));
      for (int i = 0; i < n_env; ++i) {
        const std::size_t r = static_cast<std::size_t>(t * n_env + i);
        const Vec2 mean{out.mean(i, 0), out.mean(i, 1)};
        const Vec2 a{mean.x + s0 * normal(action_rng), mean.y + s1 * normal(action_rng)};
        ro.obs[r] = current[static_cast<std::size_t>(i)];
        ro.actions(static_cast<Eigen::Index>(r), 0) = a.x;
        ro.actions(static_cast<Eigen::Index>(r), 1) = a.y;
        ro.log_prob[r] =
            log_prob_and_entropy(mean, {out.log_std(0), out.log_std(1)}, a).first;
        ro.value_r[r] = out.reward_value(i);
        ro.value_c[r] = out.cost_value(i);
        step_action[static_cast<std::size_t>(i)] = a;
      }
      parallel_for(n_env, config.threads, [&](int i) {
        step_out[static_cast<std::size_t>(i)] =
            envs[static_cast<std::size_t>(i)]->step_policy(step_action[static_cast<std::size_t>(i)]);
      });
      for (int i = 0; i < n_env; ++i) {
        const std::size_t r = static_cast<std::size_t>(t * n_env + i);
        const EnvStep& s = step_out[static_cast<std::size_t>(i)];
        ro.reward[r] = s.reward;
        ro.cost[r] = s.cost;
        ro.done[r] = s.done ? 1 : 0;
        ep_return[static_cast<std::size_t>(i)] += s.reward;
        ep_cost[static_cast<std::size_t>(i)] += s.cost;
        if (s.done) {
          ++episodes;
          successes += s.success ? 1 : 0;
          sum_return += ep_return[static_cast<std::size_t>(i)];
          sum_cost += ep_cost[static_cast<std::size_t>(i)];
          ep_return[static_cast<std::size_t>(i)] = 0.0;
          ep_cost[static_cast<std::size_t>(i)] = 0.0;
          envs[static_cast<std::size_t>(i)]->reset();
        }
      }
    }
    steps_done += batch_size;

    for (int i = 0; i < n_env; ++i) current[static_cast<std::size_t>(i)] = envs[static_cast<std::size_t>(i)]->observation();
    const PolicyOutput last = policy_forward(params, make_batch(current, spec));

    std::vector<double> adv_r(static_cast<std::size_t>(batch_size));
    std::vector<double> adv_c(adv_r.size());
    std::vector<double> target_r(adv_r.size());
    std::vector<double> target_c(adv_r.size());
    std::vector<double> sig(static_cast<std::size_t>(horizon));
    std::vector<double> vals(sig.size());
    std::vector<std::uint8_t> dn(sig.size());
    for (int i = 0; i < n_env; ++i) {
      for (int channel = 0; channel < 2; ++channel) {
        for (int t = 0; t < horizon; ++t) {
          const std::size_t r = static_cast<std::size_t>(t * n_env + i);
          sig[static_cast<std::size_t>(t)] = channel == 0 ? ro.reward[r] : ro.cost[r];
          vals[static_cast<std::size_t>(t)] = channel == 0 ? ro.value_r[r] : ro.value_c[r];
          dn[static_cast<std::size_t>(t)] = ro.done[r];
        }
        const double boot = channel == 0 ? last.reward_value(i) : last.cost_value(i);
        const GaeResult g = compute_gae(sig, vals, dn, boot, config.gamma, config.gae_lambda);
        for (int t = 0; t < horizon; ++t) {
          const std::size_t r = static_cast<std::size_t>(t * n_env + i);
          (channel == 0 ? adv_r : adv_c)[r] = g.advantages[static_cast<std::size_t>(t)];
          (channel == 0 ? target_r : target_c)[r] = g.targets[static_cast<std::size_t>(t)];
        }
      }
    }

    const double mean_cost =
        episodes > 0 ? sum_cost / episodes : std::numeric_limits<double>::quiet_NaN();
    if (!config.freeze_lambda && episodes > 0) {
      lambda = lambda_update(lambda, mean_cost, config.cost_limit, config.lambda_lr);
    }

    if (config.normalize_advantages) {
      normalize_in_place(adv_r);
      normalize_in_place(adv_c);
    }
    const std::vector<double> adv = combined_advantage(adv_r, adv_c, lambda);

    std::vector<int> order(static_cast<std::size_t>(batch_size));
    std::iota(order.begin(), order.end(), 0);
    LossValues last_loss;
    double kl_sum = 0.0;
    int kl_count = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (int start = 0; start < batch_size; start += config.minibatch) {
        const int end = std::min(batch_size, start + config.minibatch);
        const std::span<const int> rows(order.data() + start, static_cast<std::size_t>(end - start));
        TrainingBatch tb;
        tb.obs = make_batch(ro.obs, rows, spec);
        const auto m = static_cast<Eigen::Index>(rows.size());
        tb.actions.resize(m, 2);
        tb.old_log_prob.resize(m);
        tb.advantage.resize(m);
        tb.reward_target.resize(m);
        tb.cost_target.resize(m);
        for (Eigen::Index k = 0; k < m; ++k) {
          const int r = rows[static_cast<std::size_t>(k)];
          tb.actions.row(k) = ro.actions.row(r);
          tb.old_log_prob(k) = ro.log_prob[static_cast<std::size_t>(r)];
          tb.advantage(k) = adv[static_cast<std::size_t>(r)];
          tb.reward_target(k) = target_r[static_cast<std::size_t>(r)];
          tb.cost_target(k) = target_c[static_cast<std::size_t>(r)];
        }
        LossGradient lg = policy_backward(params, tb, loss_spec);
        if (!std::isfinite(lg.losses.total) || !lg.gradient.allFinite()) {
          dump_diagnostic(dump_path, static_cast<int>(it), lambda, lg.losses, params);
          std::ostringstream msg;
          msg << "non-finite loss at iteration " << it << " (policy " << lg.losses.policy
              << ", reward " << lg.losses.reward << ", cost " << lg.losses.cost << ", lambda "
              << lambda << ")";
          throw TrainingError(msg.str());
        }
        if (config.max_grad_norm > 0.0) {
          for (const bool cost_part : {false, true}) {
            const double norm = grad_norm(lg.gradient, cost_group, cost_part);
            if (norm > config.max_grad_norm) {
              const double scale = config.max_grad_norm / norm;
              for (Eigen::Index k = 0; k < lg.gradient.size(); ++k) {
                if (static_cast<bool>(cost_group[static_cast<std::size_t>(k)]) == cost_part) {
                  lg.gradient(k) *= scale;
                }
              }
            }
          }
        }
        adam.step(params.values(), lg.gradient);
        last_loss = lg.losses;
        kl_sum += lg.losses.approx_kl;
        ++kl_count;
      }
    }

    CurvePoint p;
    p.iteration = static_cast<int>(it);
    p.steps = steps_done;
    p.episodes = episodes;
    p.mean_reward = episodes > 0 ? sum_return / episodes : std::numeric_limits<double>::quiet_NaN();
    p.mean_cost = mean_cost;
    p.success_rate =
        episodes > 0 ? static_cast<double>(successes) / episodes : std::numeric_limits<double>::quiet_NaN();
    p.lambda = lambda;
    p.policy_loss = last_loss.policy;
    p.approx_kl = kl_count > 0 ? kl_sum / kl_count : 0.0;
    result.curve.push_back(p);
    if (progress) progress(p);
  }
  result.lambda = lambda;
  return result;
}

double tail_mean(const std::vector<CurvePoint>& curve, double CurvePoint::*field, double fraction) {
  if (curve.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto n = curve.size();
  const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
  double sum = 0.0;
  int used = 0;
  for (std::size_t i = n - std::min(count, n); i < n; ++i) {
    const double v = curve[i].*field;
    if (std::isfinite(v)) {
      sum += v;
      ++used;
    }
  }
  return used > 0 ? sum / used : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace crowdnav
