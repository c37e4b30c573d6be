#include "crowdnav/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "crowdnav/errors.hpp"

namespace crowdnav {

namespace {

constexpr int kPlacementAttempts = 2000;

void require(bool ok, const char* what) {
  if (!ok) throw InputError(std::string("invalid scenario: ") + what);
}

struct Placer {
  const ScenarioConfig& config;
  Rng& rng;
  std::vector<AgentState>& humans;
  const RobotState& robot;

  bool clear(const Vec2& p, double r) const {
    const double margin = config.spawn_margin;
    if (distance(p, robot.position) <= r + robot.radius + margin) return false;
    for (const AgentState& h : humans) {
      if (distance(p, h.position) <= r + h.radius + margin) return false;
    }
    return true;
  }

  double radius() {
    std::uniform_real_distribution<double> u(config.human_radius_min, config.human_radius_max);
    return u(rng);
  }

  Vec2 point(double inset) {
    return uniform_in_box(rng, std::max(config.arena_width - 2.0 * inset, 0.0),
                          std::max(config.arena_height - 2.0 * inset, 0.0));
  }

  AgentState make(double r, const Vec2& p) const {
    AgentState h;
    h.id = static_cast<int>(humans.size());
    h.position = p;
    h.radius = r;
    h.max_speed = config.human_vmax;
    h.behavior = config.behavior;
    return h;
  }

  void place_individual() {
    const double r = radius();
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const Vec2 p = point(r);
      if (!clear(p, r)) continue;
      AgentState h = make(r, p);
      h.goal = point(0.0);
      humans.push_back(h);
      return;
    }
    throw ScenarioError("spawn_scenario: could not place human " + std::to_string(humans.size()));
  }

  void place_group(int size, int group_id, const GroupSpec& spec) {
    std::normal_distribution<double> jitter(0.0, 0.2);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const std::size_t base = humans.size();
      const double leader_r = radius();
      const Vec2 leader_p = point(leader_r);
      if (!clear(leader_p, leader_r)) continue;
      AgentState leader = make(leader_r, leader_p);
      leader.group = group_id;
      leader.group_leader = true;
      leader.goal = point(0.0);
      humans.push_back(leader);

      const double start = angle(rng);
      bool ok = true;
      for (int m = 1; m < size && ok; ++m) {
        const double r = radius();
        const double ring = std::max(spec.intra_group_spacing, leader_r + r + config.spawn_margin);
        const double theta = start + 2.0 * std::numbers::pi * (m - 1) / (size - 1) + jitter(rng);
        const Vec2 offset{ring * std::cos(theta), ring * std::sin(theta)};
        const Vec2 p = leader_p + offset;
        const bool inside = std::abs(p.x) <= 0.5 * config.arena_width - r &&
                            std::abs(p.y) <= 0.5 * config.arena_height - r;
        if (!inside || !clear(p, r)) {
          ok = false;
          break;
        }
        AgentState member = make(r, p);
        if (spec.shared_goal) {
          member.group = group_id;
          member.goal_offset = offset;
          member.goal = leader.goal + offset;
        } else {
          member.goal = point(0.0);
        }
        humans.push_back(member);
      }
      if (ok) return;
      humans.resize(base);
    }
    throw ScenarioError("spawn_scenario: could not place group " + std::to_string(group_id));
  }
};

}  // namespace

void ScenarioConfig::validate() const {
  require(arena_width > 0.0 && arena_height > 0.0, "arena dimensions must be positive");
  require(human_count >= 0, "human_count must be non-negative");
  require(human_radius_min > 0.0 && human_radius_min <= human_radius_max,
          "human radius range must be nonempty and positive");
  require(human_vmax > 0.0 && robot_vmax > 0.0 && rushing_vmax > 0.0, "speeds must be positive");
  require(robot_radius > 0.0, "robot_radius must be positive");
  require(dt > 0.0 && time_limit > 0.0, "dt and time_limit must be positive");
  require(rushing_fraction >= 0.0 && rushing_fraction <= 1.0, "rushing_fraction must be in [0,1]");
  require(goal_resample.probability >= 0.0 && goal_resample.probability <= 1.0,
          "goal_resample.probability must be in [0,1]");
  require(goal_resample.period >= 0, "goal_resample.period must be non-negative");
  require(orca.time_horizon > 0.0 && orca.neighbor_distance > 0.0, "orca params must be positive");
  require(social_force.relaxation_time > 0.0 && social_force.repulsion_strength > 0.0 &&
              social_force.repulsion_range > 0.0 && social_force.neighbor_cutoff > 0.0,
          "social force params must be positive");
  require(robot_goal_min_fraction >= 0.0 && robot_goal_min_fraction < 1.0,
          "robot_goal_min_fraction must be in [0,1)");
  require(spawn_margin >= 0.0, "spawn_margin must be non-negative");
  if (grouping) {
    require(grouping->min_size >= 2 && grouping->min_size <= grouping->max_size,
            "group sizes must be >= 2 and ordered");
    require(grouping->intra_group_spacing > 0.0, "intra_group_spacing must be positive");
  }
}

ScenarioConfig ScenarioConfig::desk() {
  ScenarioConfig c;
  c.arena_width = 8.0;
  c.arena_height = 8.0;
  c.human_count = 5;
  return c;
}

std::string_view to_string(OodVariant v) {
  switch (v) {
    case OodVariant::Rushing: return "rushing";
    case OodVariant::SFModel: return "sf";
    case OodVariant::Groups: return "groups";
  }
  return "rushing";
}

OodVariant ood_from_string(std::string_view s) {
  if (s == "rushing") return OodVariant::Rushing;
  if (s == "sf") return OodVariant::SFModel;
  if (s == "groups") return OodVariant::Groups;
  throw InputError("unknown OOD variant '" + std::string(s) + "' (expected rushing|sf|groups)");
}

WorldState spawn_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  WorldState world;
  world.rng.seed(seed);
  world.dt = config.dt;
  world.time_limit = config.time_limit;
  world.robot_visible = config.robot_visible;
  world.crowd.arena_width = config.arena_width;
  world.crowd.arena_height = config.arena_height;
  world.crowd.orca = config.orca;
  world.crowd.social_force = config.social_force;
  world.crowd.resample = config.goal_resample;
  world.crowd.confine_robot = config.robot_confined;

  Rng& rng = world.rng;
  RobotState& robot = world.robot;
  robot.radius = config.robot_radius;
  robot.max_speed = config.robot_vmax;
  const double min_sep =
      config.robot_goal_min_fraction * std::min(config.arena_width, config.arena_height);
  bool placed = false;
  for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
    robot.position = uniform_in_box(rng, config.arena_width - 2.0 * robot.radius,
                                    config.arena_height - 2.0 * robot.radius);
    robot.goal = uniform_in_box(rng, config.arena_width - 2.0 * robot.radius,
                                config.arena_height - 2.0 * robot.radius);
    placed = distance(robot.position, robot.goal) >= min_sep;
  }
  if (!placed) throw ScenarioError("spawn_scenario: could not place robot start/goal");

  world.humans.reserve(static_cast<std::size_t>(config.human_count));
  Placer placer{config, rng, world.humans, robot};
  if (config.grouping && config.human_count >= 2) {
    const GroupSpec& spec = *config.grouping;
    std::uniform_int_distribution<int> size_dist(spec.min_size, spec.max_size);
    int group_id = 0;
    while (static_cast<int>(world.humans.size()) < config.human_count) {
      const int remaining = config.human_count - static_cast<int>(world.humans.size());
      int size = std::min(size_dist(rng), remaining);
      if (remaining - size == 1) size += size < spec.max_size ? 1 : -1;
      if (size < 2) size = remaining;
      if (size == 1) {
        placer.place_individual();
      } else {
        placer.place_group(size, group_id++, spec);
      }
    }
  } else {
    for (int i = 0; i < config.human_count; ++i) placer.place_individual();
  }

  const auto rushing = static_cast<std::size_t>(
      std::lround(config.rushing_fraction * static_cast<double>(config.human_count)));
  if (rushing > 0) {
    std::vector<std::size_t> order(world.humans.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < rushing && i < order.size(); ++i) {
      world.humans[order[i]].max_speed = config.rushing_vmax;
    }
  }
  return world;
}

ScenarioConfig make_ood_variant(const ScenarioConfig& config, OodVariant variant) {
  ScenarioConfig out = config;
  switch (variant) {
    case OodVariant::Rushing:
      out.rushing_fraction = 0.2;
      out.rushing_vmax = 2.0;
      break;
    case OodVariant::SFModel:
      out.behavior = Behavior::SocialForce;
      break;
    case OodVariant::Groups:
      out.grouping = GroupSpec{};
      break;
  }
  return out;
}

void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  j = nlohmann::json{
      {"arena", {{"width", c.arena_width}, {"height", c.arena_height}}},
      {"human_count", c.human_count},
      {"human_radius_range", {c.human_radius_min, c.human_radius_max}},
      {"human_vmax", c.human_vmax},
      {"robot_vmax", c.robot_vmax},
      {"robot_radius", c.robot_radius},
      {"time_limit", c.time_limit},
      {"dt", c.dt},
      {"behavior", std::string(to_string(c.behavior))},
      {"rushing_fraction", c.rushing_fraction},
      {"rushing_vmax", c.rushing_vmax},
      {"robot_visible", c.robot_visible},
      {"robot_confined", c.robot_confined},
      {"goal_resample", {{"period", c.goal_resample.period},
                         {"probability", c.goal_resample.probability}}},
      {"orca", {{"time_horizon", c.orca.time_horizon},
                {"neighbor_distance", c.orca.neighbor_distance}}},
      {"social_force", {{"relaxation_time", c.social_force.relaxation_time},
                        {"repulsion_strength", c.social_force.repulsion_strength},
                        {"repulsion_range", c.social_force.repulsion_range},
                        {"neighbor_cutoff", c.social_force.neighbor_cutoff}}},
      {"robot_goal_min_fraction", c.robot_goal_min_fraction},
      {"spawn_margin", c.spawn_margin},
  };
  if (c.grouping) {
    j["grouping"] = {{"group_size_range", {c.grouping->min_size, c.grouping->max_size}},
                     {"intra_group_spacing", c.grouping->intra_group_spacing},
                     {"shared_goal", c.grouping->shared_goal}};
  } else {
    j["grouping"] = nullptr;
  }
}

void from_json(const nlohmann::json& j, ScenarioConfig& c) {
  ScenarioConfig d;
  if (j.contains("arena")) {
    const auto& a = j.at("arena");
    c.arena_width = a.value("width", d.arena_width);
    c.arena_height = a.value("height", d.arena_height);
  }
  c.human_count = j.value("human_count", d.human_count);
  if (j.contains("human_radius_range")) {
    const auto& r = j.at("human_radius_range");
    c.human_radius_min = r.at(0).get<double>();
    c.human_radius_max = r.at(1).get<double>();
  }
  c.human_vmax = j.value("human_vmax", d.human_vmax);
  c.robot_vmax = j.value("robot_vmax", d.robot_vmax);
  c.robot_radius = j.value("robot_radius", d.robot_radius);
  c.time_limit = j.value("time_limit", d.time_limit);
  c.dt = j.value("dt", d.dt);
  c.behavior = behavior_from_string(j.value("behavior", std::string(to_string(d.behavior))));
  c.rushing_fraction = j.value("rushing_fraction", d.rushing_fraction);
  c.rushing_vmax = j.value("rushing_vmax", d.rushing_vmax);
  c.robot_visible = j.value("robot_visible", d.robot_visible);
  c.robot_confined = j.value("robot_confined", d.robot_confined);
  if (j.contains("goal_resample")) {
    const auto& g = j.at("goal_resample");
    c.goal_resample.period = g.value("period", d.goal_resample.period);
    c.goal_resample.probability = g.value("probability", d.goal_resample.probability);
  }
  if (j.contains("orca")) {
    const auto& o = j.at("orca");
    c.orca.time_horizon = o.value("time_horizon", d.orca.time_horizon);
    c.orca.neighbor_distance = o.value("neighbor_distance", d.orca.neighbor_distance);
  }
  if (j.contains("social_force")) {
    const auto& s = j.at("social_force");
    c.social_force.relaxation_time = s.value("relaxation_time", d.social_force.relaxation_time);
    c.social_force.repulsion_strength =
        s.value("repulsion_strength", d.social_force.repulsion_strength);
    c.social_force.repulsion_range = s.value("repulsion_range", d.social_force.repulsion_range);
    c.social_force.neighbor_cutoff = s.value("neighbor_cutoff", d.social_force.neighbor_cutoff);
  }
  c.robot_goal_min_fraction = j.value("robot_goal_min_fraction", d.robot_goal_min_fraction);
  c.spawn_margin = j.value("spawn_margin", d.spawn_margin);
  if (j.contains("grouping") && !j.at("grouping").is_null()) {
    const auto& g = j.at("grouping");
    GroupSpec spec;
    if (g.contains("group_size_range")) {
      spec.min_size = g.at("group_size_range").at(0).get<int>();
      spec.max_size = g.at("group_size_range").at(1).get<int>();
    }
    spec.intra_group_spacing = g.value("intra_group_spacing", spec.intra_group_spacing);
    spec.shared_goal = g.value("shared_goal", spec.shared_goal);
    c.grouping = spec;
  } else {
    c.grouping.reset();
  }
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError("malformed scenario file " + path + ": " + e.what());
  }
  ScenarioConfig c;
  try {
    c = j.get<ScenarioConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError("malformed scenario file " + path + ": " + e.what());
  }
  c.validate();
  return c;
}

}  // namespace crowdnav
