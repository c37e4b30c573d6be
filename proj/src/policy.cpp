#include "crowdnav/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "crowdnav/errors.hpp"
#include "crowdnav/util.hpp"

namespace crowdnav {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

const double kLogTwoPi = std::log(2.0 * std::numbers::pi);

DenseLayout add_dense(std::size_t& cursor, int in, int out) {
  DenseLayout l;
  l.in = in;
  l.out = out;
  l.weight = cursor;
  cursor += static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
  l.bias = cursor;
  cursor += static_cast<std::size_t>(out);
  return l;
}

TowerLayout add_tower(std::size_t& cursor, const ObservationSpec& obs, const NetworkConfig& net) {
  TowerLayout t;
  t.begin = cursor;
  t.encoder1 = add_dense(cursor, obs.human_dim(), net.encoder_width);
  t.encoder2 = add_dense(cursor, net.encoder_width, net.encoder_width);
  t.trunk1 = add_dense(cursor, ObservationSpec::kRobotDim + net.encoder_width, net.hidden_width);
  t.trunk2 = add_dense(cursor, net.hidden_width, net.hidden_width);
  t.end = cursor;
  return t;
}

void dense_forward(const double* p, const DenseLayout& l, const MatrixXd& in, MatrixXd& out) {
  const ConstRowMap w(p + l.weight, l.out, l.in);
  const Eigen::Map<const VectorXd> b(p + l.bias, l.out);
  out.noalias() = in * w.transpose();
  out.rowwise() += b.transpose();
}

void dense_backward(const double* p, double* g, const DenseLayout& l, const MatrixXd& in,
                    const MatrixXd& d_out, MatrixXd* d_in) {
  RowMap gw(g + l.weight, l.out, l.in);
  gw.noalias() += d_out.transpose() * in;
  Eigen::Map<VectorXd> gb(g + l.bias, l.out);
  gb += d_out.colwise().sum().transpose();
  if (d_in != nullptr) {
    const ConstRowMap w(p + l.weight, l.out, l.in);
    d_in->noalias() = d_out * w;
  }
}

void tanh_inplace(MatrixXd& m) { m = m.array().tanh().matrix(); }

MatrixXd tanh_backward(const MatrixXd& activated, const MatrixXd& d_activated) {
  return (d_activated.array() * (1.0 - activated.array().square())).matrix();
}

struct TowerCache {
  MatrixXd a1, a2, pooled, input, t1, t2;
  VectorXd inv_count;
};

void tower_forward(const double* p, const TowerLayout& t, const ObservationBatch& batch,
                   TowerCache& c) {
  const int b_count = batch.size();
  const int slots = static_cast<int>(batch.mask.cols());
  const int width = t.encoder2.out;
  dense_forward(p, t.encoder1, batch.humans, c.a1);
  tanh_inplace(c.a1);
  dense_forward(p, t.encoder2, c.a1, c.a2);
  tanh_inplace(c.a2);

  c.pooled = MatrixXd::Zero(b_count, width);
  c.inv_count = VectorXd::Zero(b_count);
  for (int b = 0; b < b_count; ++b) {
    const double count = batch.mask.row(b).sum();
    if (count <= 0.0) continue;
    c.inv_count(b) = 1.0 / count;
    for (int s = 0; s < slots; ++s) {
      const double m = batch.mask(b, s);
      if (m != 0.0) c.pooled.row(b) += m * c.a2.row(b * slots + s);
    }
    c.pooled.row(b) *= c.inv_count(b);
  }

  c.input.resize(b_count, batch.robot.cols() + width);
  c.input << batch.robot, c.pooled;
  dense_forward(p, t.trunk1, c.input, c.t1);
  tanh_inplace(c.t1);
  dense_forward(p, t.trunk2, c.t1, c.t2);
  tanh_inplace(c.t2);
}

void tower_backward(const double* p, double* g, const TowerLayout& t,
                    const ObservationBatch& batch, const TowerCache& c, const MatrixXd& d_t2) {
  const int b_count = batch.size();
  const int slots = static_cast<int>(batch.mask.cols());
  const int robot_dim = static_cast<int>(batch.robot.cols());

  MatrixXd d_t1, d_input, d_a1;
  dense_backward(p, g, t.trunk2, c.t1, tanh_backward(c.t2, d_t2), &d_t1);
  dense_backward(p, g, t.trunk1, c.input, tanh_backward(c.t1, d_t1), &d_input);

  MatrixXd d_a2 = MatrixXd::Zero(c.a2.rows(), c.a2.cols());
  for (int b = 0; b < b_count; ++b) {
    if (c.inv_count(b) == 0.0) continue;
    for (int s = 0; s < slots; ++s) {
      const double m = batch.mask(b, s);
      if (m != 0.0) {
        d_a2.row(b * slots + s) = (m * c.inv_count(b)) * d_input.row(b).tail(d_a2.cols());
      }
    }
  }
  (void)robot_dim;
  dense_backward(p, g, t.encoder2, c.a1, tanh_backward(c.a2, d_a2), &d_a1);
  dense_backward(p, g, t.encoder1, batch.humans, tanh_backward(c.a1, d_a1), nullptr);
}

struct ForwardCache {
  TowerCache actor, reward, cost;
  PolicyOutput out;
  Eigen::Vector2d raw_log_std;
};

void check_batch(const PolicyParams& params, const ObservationBatch& batch) {
  const ObservationSpec& spec = params.observation_spec();
  const auto b = batch.robot.rows();
  if (batch.robot.cols() != ObservationSpec::kRobotDim || batch.mask.rows() != b ||
      batch.mask.cols() != spec.max_humans || batch.humans.rows() != b * spec.max_humans ||
      batch.humans.cols() != spec.human_dim()) {
    throw InputError("policy_forward: observation batch does not match the network shape");
  }
}

void forward(const PolicyParams& params, const ObservationBatch& batch, ForwardCache& fc) {
  check_batch(params, batch);
  const double* p = params.values().data();
  tower_forward(p, params.actor_tower(), batch, fc.actor);
  const bool shared = params.network_config().share_actor_reward;
  if (!shared) tower_forward(p, params.reward_tower(), batch, fc.reward);
  tower_forward(p, params.cost_tower(), batch, fc.cost);

  MatrixXd tmp;
  dense_forward(p, params.actor_head(), fc.actor.t2, fc.out.mean);
  dense_forward(p, params.reward_head(), shared ? fc.actor.t2 : fc.reward.t2, tmp);
  fc.out.reward_value = tmp.col(0);
  dense_forward(p, params.cost_head(), fc.cost.t2, tmp);
  fc.out.cost_value = tmp.col(0);
  for (int i = 0; i < 2; ++i) {
    fc.raw_log_std(i) = p[params.log_std_offset() + static_cast<std::size_t>(i)];
    fc.out.log_std(i) = std::clamp(fc.raw_log_std(i), kMinLogStd, kMaxLogStd);
  }
}

void fill_row(const Observation& o, const ObservationSpec& spec, ObservationBatch& batch, int r) {
  const int dim = spec.human_dim();
  if (static_cast<int>(o.robot.size()) != ObservationSpec::kRobotDim ||
      static_cast<int>(o.mask.size()) != spec.max_humans ||
      static_cast<int>(o.humans.size()) != spec.max_humans * dim) {
    throw InputError("make_batch: observation does not match the observation spec");
  }
  for (int i = 0; i < ObservationSpec::kRobotDim; ++i) {
    batch.robot(r, i) = o.robot[static_cast<std::size_t>(i)];
  }
  for (int s = 0; s < spec.max_humans; ++s) {
    batch.mask(r, s) = o.mask[static_cast<std::size_t>(s)];
    for (int j = 0; j < dim; ++j) {
      batch.humans(r * spec.max_humans + s, j) = o.humans[static_cast<std::size_t>(s * dim + j)];
    }
  }
}

// Shared by evaluate_losses and policy_backward. Fills per-sample output
// gradients when `grads` is non-null.
struct OutputGrads {
  MatrixXd d_mean;
  Eigen::Vector2d d_log_std = Eigen::Vector2d::Zero();
  MatrixXd d_reward;
  MatrixXd d_cost;
};

LossValues losses_from_output(const ForwardCache& fc, const TrainingBatch& batch,
                              const LossSpec& spec, OutputGrads* grads) {
  const PolicyOutput& out = fc.out;
  const int n = batch.obs.size();
  if (batch.actions.rows() != n || batch.actions.cols() != 2 || batch.old_log_prob.size() != n ||
      batch.advantage.size() != n || batch.reward_target.size() != n ||
      batch.cost_target.size() != n) {
    throw InputError("policy losses: training batch columns have inconsistent lengths");
  }
  LossValues lv;
  if (grads != nullptr) {
    grads->d_mean = MatrixXd::Zero(n, 2);
    grads->d_reward = MatrixXd::Zero(n, 1);
    grads->d_cost = MatrixXd::Zero(n, 1);
    grads->d_log_std.setZero();
  }
  if (n == 0) return lv;
  const double inv_n = 1.0 / n;
  const Eigen::Vector2d sigma = out.log_std.array().exp();
  const double log_std_sum = out.log_std.sum();

  for (int b = 0; b < n; ++b) {
    const double z0 = (batch.actions(b, 0) - out.mean(b, 0)) / sigma(0);
    const double z1 = (batch.actions(b, 1) - out.mean(b, 1)) / sigma(1);
    const double log_prob = -0.5 * (z0 * z0 + z1 * z1) - log_std_sum - kLogTwoPi;
    const double ratio = std::exp(log_prob - batch.old_log_prob(b));
    const double adv = batch.advantage(b);
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - spec.clip, 1.0 + spec.clip) * adv;
    lv.policy += std::min(unclipped, clipped);
    if (std::abs(ratio - 1.0) > spec.clip) lv.clip_fraction += 1.0;
    lv.approx_kl += batch.old_log_prob(b) - log_prob;

    const double d_reward = out.reward_value(b) - batch.reward_target(b);
    const double d_cost = out.cost_value(b) - batch.cost_target(b);
    lv.reward += spec.c1 * d_reward * d_reward;
    lv.cost += spec.c2 * d_cost * d_cost;

    if (grads != nullptr) {
      // d(-w l_pi)/d log_prob; zero when the clipped branch is active.
      const double d_log_prob = unclipped <= clipped ? -spec.policy_weight * unclipped * inv_n : 0.0;
      grads->d_mean(b, 0) = d_log_prob * z0 / sigma(0);
      grads->d_mean(b, 1) = d_log_prob * z1 / sigma(1);
      grads->d_log_std(0) += d_log_prob * (z0 * z0 - 1.0);
      grads->d_log_std(1) += d_log_prob * (z1 * z1 - 1.0);
      grads->d_reward(b, 0) = spec.reward_weight * 2.0 * spec.c1 * d_reward * inv_n;
      grads->d_cost(b, 0) = spec.cost_weight * 2.0 * spec.c2 * d_cost * inv_n;
    }
  }
  lv.policy *= inv_n;
  lv.reward *= inv_n;
  lv.cost *= inv_n;
  lv.clip_fraction *= inv_n;
  lv.approx_kl *= inv_n;
  lv.total = -spec.policy_weight * lv.policy + spec.reward_weight * lv.reward +
             spec.cost_weight * lv.cost;
  return lv;
}

}  // namespace

PolicyParams::PolicyParams(ObservationSpec obs, NetworkConfig net) : obs_(obs), net_(net) {
  if (obs.max_humans < 0 || obs.horizon < 1 || net.encoder_width < 1 || net.hidden_width < 1) {
    throw InputError("PolicyParams: invalid network shape");
  }
  std::size_t cursor = 0;
  actor_ = add_tower(cursor, obs_, net_);
  if (!net_.share_actor_reward) reward_ = add_tower(cursor, obs_, net_);
  cost_ = add_tower(cursor, obs_, net_);
  actor_head_ = add_dense(cursor, net_.hidden_width, 2);
  reward_head_ = add_dense(cursor, net_.hidden_width, 1);
  cost_head_ = add_dense(cursor, net_.hidden_width, 1);
  log_std_ = cursor;
  cursor += 2;
  values_ = VectorXd::Zero(static_cast<Eigen::Index>(cursor));
  values_(static_cast<Eigen::Index>(log_std_)) = net_.init_log_std;
  values_(static_cast<Eigen::Index>(log_std_ + 1)) = net_.init_log_std;
}

PolicyParams PolicyParams::random(ObservationSpec obs, NetworkConfig net, std::uint64_t seed) {
  PolicyParams params(obs, net);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto init = [&](const DenseLayout& l, double gain) {
    const double scale = gain / std::sqrt(static_cast<double>(l.in));
    for (std::size_t i = 0; i < static_cast<std::size_t>(l.in * l.out); ++i) {
      params.values_(static_cast<Eigen::Index>(l.weight + i)) = scale * normal(rng);
    }
  };
  auto init_tower = [&](const TowerLayout& t) {
    init(t.encoder1, 1.0);
    init(t.encoder2, 1.0);
    init(t.trunk1, 1.0);
    init(t.trunk2, 1.0);
  };
  init_tower(params.actor_);
  if (!net.share_actor_reward) init_tower(params.reward_);
  init_tower(params.cost_);
  init(params.actor_head_, 0.01);
  init(params.reward_head_, 1.0);
  init(params.cost_head_, 1.0);
  return params;
}

std::vector<std::pair<std::size_t, std::size_t>> PolicyParams::cost_ranges() const {
  return {{cost_.begin, cost_.end},
          {cost_head_.weight, cost_head_.bias + static_cast<std::size_t>(cost_head_.out)}};
}

std::vector<std::pair<std::size_t, std::size_t>> PolicyParams::actor_only_ranges() const {
  std::vector<std::pair<std::size_t, std::size_t>> r;
  if (!net_.share_actor_reward) r.emplace_back(actor_.begin, actor_.end);
  r.emplace_back(actor_head_.weight, actor_head_.bias + static_cast<std::size_t>(actor_head_.out));
  r.emplace_back(log_std_, log_std_ + 2);
  return r;
}

ObservationBatch make_batch(std::span<const Observation> observations,
                            const ObservationSpec& spec) {
  ObservationBatch batch;
  const int n = static_cast<int>(observations.size());
  batch.robot.resize(n, ObservationSpec::kRobotDim);
  batch.mask.resize(n, spec.max_humans);
  batch.humans.resize(static_cast<Eigen::Index>(n) * spec.max_humans, spec.human_dim());
  for (int r = 0; r < n; ++r) fill_row(observations[static_cast<std::size_t>(r)], spec, batch, r);
  return batch;
}

ObservationBatch make_batch(std::span<const Observation> observations, std::span<const int> rows,
                            const ObservationSpec& spec) {
  ObservationBatch batch;
  const int n = static_cast<int>(rows.size());
  batch.robot.resize(n, ObservationSpec::kRobotDim);
  batch.mask.resize(n, spec.max_humans);
  batch.humans.resize(static_cast<Eigen::Index>(n) * spec.max_humans, spec.human_dim());
  for (int r = 0; r < n; ++r) {
    fill_row(observations[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])], spec,
             batch, r);
  }
  return batch;
}

PolicyOutput policy_forward(const PolicyParams& params, const ObservationBatch& batch) {
  ForwardCache fc;
  forward(params, batch, fc);
  return std::move(fc.out);
}

SinglePolicyOutput policy_forward(const PolicyParams& params, const Observation& obs) {
  const auto batch = make_batch(std::span<const Observation>(&obs, 1), params.observation_spec());
  const PolicyOutput out = policy_forward(params, batch);
  return {{out.mean(0, 0), out.mean(0, 1)},
          {out.log_std(0), out.log_std(1)},
          out.reward_value(0),
          out.cost_value(0)};
}

std::pair<double, double> log_prob_and_entropy(const Vec2& mean, const Vec2& log_std,
                                               const Vec2& action) {
  const double z0 = (action.x - mean.x) / std::exp(log_std.x);
  const double z1 = (action.y - mean.y) / std::exp(log_std.y);
  const double log_prob = -0.5 * (z0 * z0 + z1 * z1) - log_std.x - log_std.y - kLogTwoPi;
  const double entropy = 1.0 + kLogTwoPi + log_std.x + log_std.y;
  return {log_prob, entropy};
}

LossValues evaluate_losses(const PolicyParams& params, const TrainingBatch& batch,
                           const LossSpec& spec) {
  ForwardCache fc;
  forward(params, batch.obs, fc);
  return losses_from_output(fc, batch, spec, nullptr);
}

LossGradient policy_backward(const PolicyParams& params, const TrainingBatch& batch,
                             const LossSpec& spec) {
  ForwardCache fc;
  forward(params, batch.obs, fc);
  OutputGrads og;
  LossGradient result;
  result.losses = losses_from_output(fc, batch, spec, &og);
  result.gradient = VectorXd::Zero(static_cast<Eigen::Index>(params.size()));

  const double* p = params.values().data();
  double* g = result.gradient.data();
  const bool shared = params.network_config().share_actor_reward;

  MatrixXd d_actor_t2, d_reward_t2, d_cost_t2;
  dense_backward(p, g, params.actor_head(), fc.actor.t2, og.d_mean, &d_actor_t2);
  dense_backward(p, g, params.reward_head(), shared ? fc.actor.t2 : fc.reward.t2, og.d_reward,
                 &d_reward_t2);
  dense_backward(p, g, params.cost_head(), fc.cost.t2, og.d_cost, &d_cost_t2);

  if (shared) {
    d_actor_t2 += d_reward_t2;
  } else {
    tower_backward(p, g, params.reward_tower(), batch.obs, fc.reward, d_reward_t2);
  }
  tower_backward(p, g, params.actor_tower(), batch.obs, fc.actor, d_actor_t2);
  tower_backward(p, g, params.cost_tower(), batch.obs, fc.cost, d_cost_t2);

  for (int i = 0; i < 2; ++i) {
    const double raw = fc.raw_log_std(i);
    if (raw > kMinLogStd && raw < kMaxLogStd) {
      g[params.log_std_offset() + static_cast<std::size_t>(i)] += og.d_log_std(i);
    }
  }
  return result;
}

nlohmann::json checkpoint_json(const PolicyParams& params, const nlohmann::json& run_config) {
  const ObservationSpec& o = params.observation_spec();
  const NetworkConfig& n = params.network_config();
  std::vector<double> values(params.values().data(), params.values().data() + params.size());
  return {
      {"format", "crowdnav-policy"},
      {"version", 1},
      {"config_hash", config_hash(run_config)},
      {"config", run_config},
      {"observation",
       {{"max_humans", o.max_humans},
        {"horizon", o.horizon},
        {"include_uncertainty", o.include_uncertainty}}},
      {"network",
       {{"encoder_width", n.encoder_width},
        {"hidden_width", n.hidden_width},
        {"share_actor_reward", n.share_actor_reward},
        {"init_log_std", n.init_log_std}}},
      {"params", values},
  };
}

PolicyParams params_from_checkpoint(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "crowdnav-policy") {
    throw InputError("checkpoint: unrecognised format tag");
  }
  if (j.value("version", 0) != 1) throw InputError("checkpoint: unsupported version");
  ObservationSpec o;
  const auto& jo = j.at("observation");
  o.max_humans = jo.at("max_humans").get<int>();
  o.horizon = jo.at("horizon").get<int>();
  o.include_uncertainty = jo.at("include_uncertainty").get<bool>();
  NetworkConfig n;
  const auto& jn = j.at("network");
  n.encoder_width = jn.at("encoder_width").get<int>();
  n.hidden_width = jn.at("hidden_width").get<int>();
  n.share_actor_reward = jn.at("share_actor_reward").get<bool>();
  n.init_log_std = jn.at("init_log_std").get<double>();
  PolicyParams params(o, n);
  const auto values = j.at("params").get<std::vector<double>>();
  if (values.size() != params.size()) {
    throw InputError("checkpoint: parameter count does not match the declared network");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    params.values()(static_cast<Eigen::Index>(i)) = values[i];
  }
  if (j.contains("config") && j.value("config_hash", std::string()) != config_hash(j.at("config"))) {
    throw InputError("checkpoint: embedded config hash mismatch");
  }
  return params;
}

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const nlohmann::json& run_config) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint: " + path);
  out << checkpoint_json(params, run_config).dump() << '\n';
}

PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("missing checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed checkpoint " + path + ": " + e.what());
  }
  return params_from_checkpoint(j);
}

}  // namespace crowdnav
