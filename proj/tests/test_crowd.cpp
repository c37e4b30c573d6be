#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "crowdnav/errors.hpp"
#include "crowdnav/orca.hpp"
#include "crowdnav/scenario.hpp"
#include "crowdnav/social_force.hpp"

using namespace crowdnav;

namespace {

AgentState agent(int id, Vec2 p, Vec2 v, Vec2 goal, double r = 0.3, double vmax = 1.0) {
  AgentState a;
  a.id = id;
  a.position = p;
  a.velocity = v;
  a.goal = goal;
  a.radius = r;
  a.max_speed = vmax;
  return a;
}

void check_no_overlap(const WorldState& w, double margin) {
  for (std::size_t i = 0; i < w.humans.size(); ++i) {
    CHECK(distance(w.humans[i].position, w.robot.position) >
          w.humans[i].radius + w.robot.radius + margin - 1e-12);
    for (std::size_t j = i + 1; j < w.humans.size(); ++j) {
      CHECK(distance(w.humans[i].position, w.humans[j].position) >
            w.humans[i].radius + w.humans[j].radius + margin - 1e-12);
    }
  }
}

}  // namespace

TEST_CASE("ORCA without neighbours returns the preferred velocity exactly") {
  const AgentState a = agent(0, {0, 0}, {0, 0}, {3, 4});
  const Vec2 v = orca_velocity(a, {}, 0.25, OrcaParams{});
  const Vec2 pref = preferred_velocity(a.position, a.goal, a.max_speed, 0.25);
  CHECK(v.x == pref.x);
  CHECK(v.y == pref.y);
  CHECK(v.x == doctest::Approx(0.6));
  CHECK(v.y == doctest::Approx(0.8));
}

TEST_CASE("ORCA head-on pair is symmetric") {
  const AgentState a = agent(0, {-2, 0}, {1, 0}, {4, 0});
  const AgentState b = agent(1, {2, 0}, {-1, 0}, {-4, 0});
  const std::vector<AgentState> na{b};
  const std::vector<AgentState> nb{a};
  const Vec2 va = orca_velocity(a, na, 0.25, OrcaParams{});
  const Vec2 vb = orca_velocity(b, nb, 0.25, OrcaParams{});
  CHECK(vb.x == doctest::Approx(-va.x).epsilon(1e-9));
  CHECK(vb.y == doctest::Approx(-va.y).epsilon(1e-9));
  CHECK(std::abs(va.x) < 1.0);  // both slow down relative to preferred
}

TEST_CASE("ORCA matches a brute-force feasibility oracle on random 3-agent instances") {
  Rng rng(1234);
  std::uniform_real_distribution<double> pos(-3.0, 3.0);
  std::uniform_real_distribution<double> vel(-1.0, 1.0);
  std::uniform_real_distribution<double> rad(0.3, 0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int feasible_instances = 0;
  for (int inst = 0; inst < 200; ++inst) {
    std::vector<AgentState> agents;
    while (agents.size() < 3) {
      AgentState a = agent(static_cast<int>(agents.size()), {pos(rng), pos(rng)},
                           clamp_velocity({vel(rng), vel(rng)}, 1.0), {pos(rng), pos(rng)},
                           rad(rng));
      bool ok = true;
      for (const AgentState& o : agents) {
        ok = ok && distance(o.position, a.position) > o.radius + a.radius + 0.05;
      }
      if (ok) agents.push_back(a);
    }
    const AgentState& self = agents[0];
    const std::vector<AgentState> nb{agents[1], agents[2]};
    const auto lines = orca_lines(self, nb, 0.25, OrcaParams{});
    const Vec2 pref = preferred_velocity(self.position, self.goal, self.max_speed, 0.25);
    const Vec2 v = orca_velocity(self, nb, 0.25, OrcaParams{});
    CHECK(v.norm() <= self.max_speed + 1e-9);
    bool feasible = true;
    for (const auto& l : lines) feasible = feasible && orca_violation(l, v) <= 1e-6;
    if (!feasible) continue;
    ++feasible_instances;
    const double best = distance(v, pref);
    int candidates = 0;
    int better = 0;
    for (int s = 0; s < 10000; ++s) {
      const double r = std::sqrt(unit(rng)) * self.max_speed;
      const double th = 2.0 * std::numbers::pi * unit(rng);
      const Vec2 c{r * std::cos(th), r * std::sin(th)};
      bool ok = true;
      for (const auto& l : lines) ok = ok && orca_violation(l, c) <= 0.0;
      if (!ok) continue;
      ++candidates;
      if (distance(c, pref) < best - 1e-6) ++better;
    }
    CHECK(better <= candidates / 100);
  }
  CHECK(feasible_instances > 100);
}

TEST_CASE("ORCA infeasible case still returns a bounded velocity") {
  // Agent boxed in by overlapping neighbours.
  const AgentState self = agent(0, {0, 0}, {0, 0}, {5, 0});
  std::vector<AgentState> nb;
  for (int i = 0; i < 6; ++i) {
    const double th = i * std::numbers::pi / 3.0;
    nb.push_back(agent(i + 1, {0.55 * std::cos(th), 0.55 * std::sin(th)},
                       {-0.5 * std::cos(th), -0.5 * std::sin(th)}, {0, 0}));
  }
  const Vec2 v = orca_velocity(self, nb, 0.25, OrcaParams{});
  CHECK(v.finite());
  CHECK(v.norm() <= 1.0 + 1e-9);
}

TEST_CASE("social force: zero net force at preferred velocity without neighbours") {
  AgentState a = agent(0, {0, 0}, {0, 0}, {10, 0});
  a.velocity = preferred_velocity(a.position, a.goal, a.max_speed, 0.25);
  const Vec2 v = social_force_velocity(a, {}, SocialForceParams{}, 0.25);
  CHECK(v.x == a.velocity.x);
  CHECK(v.y == a.velocity.y);
}

TEST_CASE("social force repulsion equals A at contact distance") {
  SocialForceParams p;
  AgentState a = agent(0, {0, 0}, {0, 0}, {0, 0}, 0.3);
  const AgentState b = agent(1, {0.7, 0}, {0, 0}, {0.7, 0}, 0.4);
  const Vec2 f = social_force(a, std::vector<AgentState>{b}, p, 0.25);
  CHECK(f.norm() == doctest::Approx(p.repulsion_strength).epsilon(1e-12));
  CHECK(f.x < 0.0);
}

TEST_CASE("social force from a symmetric ring cancels") {
  SocialForceParams p;
  const AgentState a = agent(0, {1, 2}, {0, 0}, {1, 2});
  std::vector<AgentState> ring;
  for (int i = 0; i < 12; ++i) {
    const double th = 2.0 * std::numbers::pi * i / 12.0;
    ring.push_back(agent(i + 1, {1 + 0.9 * std::cos(th), 2 + 0.9 * std::sin(th)}, {0, 0}, {0, 0}));
  }
  const Vec2 f = social_force(a, ring, p, 0.25);
  CHECK(f.norm() < 1e-9);
}

TEST_CASE("social force repulsion decays with distance and respects the cutoff") {
  SocialForceParams p;
  const AgentState a = agent(0, {0, 0}, {0, 0}, {0, 0});
  double prev = INFINITY;
  for (double d = 0.7; d < 3.9; d += 0.1) {
    const AgentState b = agent(1, {d, 0}, {0, 0}, {d, 0});
    const double m = social_force(a, std::vector<AgentState>{b}, p, 0.25).norm();
    CHECK(m < prev);
    prev = m;
  }
  const AgentState far = agent(1, {4.5, 0}, {0, 0}, {4.5, 0});
  CHECK(social_force(a, std::vector<AgentState>{far}, p, 0.25).norm() == 0.0);
  // continuity away from zero distance
  const AgentState b1 = agent(1, {1.0, 0}, {0, 0}, {1.0, 0});
  const AgentState b2 = agent(1, {1.0 + 1e-9, 0}, {0, 0}, {1.0, 0});
  CHECK(distance(social_force(a, std::vector<AgentState>{b1}, p, 0.25),
                 social_force(a, std::vector<AgentState>{b2}, p, 0.25)) < 1e-7);
}

TEST_CASE("coincident agents separate by id order") {
  SocialForceParams p;
  const AgentState a = agent(0, {0, 0}, {0, 0}, {0, 0});
  const AgentState b = agent(1, {0, 0}, {0, 0}, {0, 0});
  const Vec2 fa = social_force(a, std::vector<AgentState>{b}, p, 0.25);
  const Vec2 fb = social_force(b, std::vector<AgentState>{a}, p, 0.25);
  CHECK(fa.x < 0.0);
  CHECK(fb.x > 0.0);
  CHECK(fa.x == doctest::Approx(-fb.x));
}

TEST_CASE("spawn: default config places 20 non-overlapping humans") {
  ScenarioConfig c;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const WorldState w = spawn_scenario(c, seed);
    REQUIRE(w.humans.size() == 20);
    for (const AgentState& h : w.humans) {
      CHECK(h.radius >= 0.3);
      CHECK(h.radius <= 0.5);
      CHECK(h.max_speed == 1.0);
    }
    check_no_overlap(w, c.spawn_margin);
    CHECK(distance(w.robot.position, w.robot.goal) >= 0.6 * 12.0);
  }
}

TEST_CASE("spawn: rushing fraction 0.2 of 20 gives exactly 4 fast humans") {
  const ScenarioConfig c = make_ood_variant(ScenarioConfig{}, OodVariant::Rushing);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const WorldState w = spawn_scenario(c, seed);
    int fast = 0;
    for (const AgentState& h : w.humans) fast += h.max_speed == 2.0 ? 1 : 0;
    CHECK(fast == 4);
  }
}

TEST_CASE("spawn: empty crowd and determinism") {
  ScenarioConfig c;
  c.human_count = 0;
  const WorldState w = spawn_scenario(c, 7);
  CHECK(w.humans.empty());
  const WorldState a = spawn_scenario(ScenarioConfig{}, 9);
  const WorldState b = spawn_scenario(ScenarioConfig{}, 9);
  for (std::size_t i = 0; i < a.humans.size(); ++i) {
    CHECK(a.humans[i].position.x == b.humans[i].position.x);
    CHECK(a.humans[i].goal.y == b.humans[i].goal.y);
  }
}

TEST_CASE("spawn: groups keep the head count and stay overlap-free") {
  const ScenarioConfig c = make_ood_variant(ScenarioConfig{}, OodVariant::Groups);
  REQUIRE(c.grouping.has_value());
  CHECK(c.human_count == 20);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const WorldState w = spawn_scenario(c, seed);
    CHECK(w.humans.size() == 20);
    check_no_overlap(w, c.spawn_margin);
    int leaders = 0;
    int members = 0;
    for (const AgentState& h : w.humans) {
      leaders += h.group_leader ? 1 : 0;
      members += (h.group >= 0 && !h.group_leader) ? 1 : 0;
    }
    CHECK(leaders >= 1);
    CHECK(members >= leaders);
  }
}

TEST_CASE("OOD variants change only their field") {
  const ScenarioConfig base;
  const ScenarioConfig sf = make_ood_variant(base, OodVariant::SFModel);
  CHECK(sf.behavior == Behavior::SocialForce);
  CHECK(sf.human_count == base.human_count);
  CHECK(sf.rushing_fraction == base.rushing_fraction);
  CHECK_FALSE(sf.grouping.has_value());
  const ScenarioConfig r = make_ood_variant(base, OodVariant::Rushing);
  CHECK(r.rushing_fraction == 0.2);
  CHECK(r.rushing_vmax == 2.0);
  CHECK(r.behavior == Behavior::Orca);
  CHECK(ood_from_string("groups") == OodVariant::Groups);
  CHECK_THROWS_AS(ood_from_string("zombies"), InputError);
}

TEST_CASE("goal resampling schedule") {
  WorldState w;
  w.crowd.arena_width = 12;
  w.crowd.arena_height = 12;
  for (int i = 0; i < 10; ++i) {
    w.humans.push_back(agent(i, {-5.0, 0.5 * i - 2.5}, {0, 0}, {5.0, 0.5 * i - 2.5}));
  }
  Rng rng(5);
  SUBCASE("off-period step leaves goals alone") {
    w.step_index = 3;
    const WorldState before = w;
    resample_goals(w, rng);
    for (std::size_t i = 0; i < w.humans.size(); ++i) {
      CHECK(w.humans[i].goal.x == before.humans[i].goal.x);
      CHECK(w.humans[i].goal.y == before.humans[i].goal.y);
    }
  }
  SUBCASE("probability one resamples every goal") {
    w.step_index = 5;
    w.crowd.resample.probability = 1.0;
    const WorldState before = w;
    resample_goals(w, rng);
    for (std::size_t i = 0; i < w.humans.size(); ++i) {
      CHECK(distance(w.humans[i].goal, before.humans[i].goal) > 0.0);
      CHECK(std::abs(w.humans[i].goal.x) <= 6.0);
      CHECK(std::abs(w.humans[i].goal.y) <= 6.0);
    }
  }
}

TEST_CASE("goal resampling fraction concentrates at 0.5") {
  WorldState w;
  w.crowd.arena_width = 100;
  w.crowd.arena_height = 100;
  w.step_index = 5;
  for (int i = 0; i < 10000; ++i) w.humans.push_back(agent(i, {0, 0}, {0, 0}, {30, 30}));
  Rng rng(11);
  resample_goals(w, rng);
  int changed = 0;
  for (const AgentState& h : w.humans) changed += (h.goal.x != 30.0 || h.goal.y != 30.0) ? 1 : 0;
  const double frac = changed / 10000.0;
  CHECK(frac >= 0.48);
  CHECK(frac <= 0.52);
}

TEST_CASE("invisible robot does not influence human velocities") {
  for (Behavior b : {Behavior::Orca, Behavior::SocialForce}) {
    ScenarioConfig c;
    c.behavior = b;
    WorldState w = spawn_scenario(c, 3);
    const auto v0 = human_velocities(w);
    // Robot placed on human 0's path, walking straight at it.
    const AgentState& h0 = w.humans[0];
    const Vec2 heading = normalized(h0.goal - h0.position);
    w.robot.position = h0.position + 0.8 * heading;
    w.robot.velocity = -1.0 * heading;
    const auto v1 = human_velocities(w);
    for (std::size_t i = 0; i < v0.size(); ++i) {
      CHECK(v0[i].x == v1[i].x);
      CHECK(v0[i].y == v1[i].y);
    }
    w.robot_visible = true;
    const auto v2 = human_velocities(w);
    bool any = false;
    for (std::size_t i = 0; i < v0.size(); ++i) any = any || distance(v0[i], v2[i]) > 0.0;
    CHECK_MESSAGE(any, to_string(b));
  }
}

TEST_CASE("scenario JSON round trip and load errors") {
  ScenarioConfig c = make_ood_variant(ScenarioConfig::desk(), OodVariant::Groups);
  c.robot_visible = true;
  const nlohmann::json j = c;
  const ScenarioConfig back = j.get<ScenarioConfig>();
  CHECK(nlohmann::json(back) == j);

  const auto dir = std::filesystem::temp_directory_path() / "crowdnav_test_crowd";
  std::filesystem::create_directories(dir);
  const std::string missing = (dir / "nope.json").string();
  try {
    load_scenario(missing);
    FAIL("expected ScenarioError");
  } catch (const ScenarioError& e) {
    CHECK(std::string(e.what()).find(missing) != std::string::npos);
  }
  const std::string partial = (dir / "partial.json").string();
  std::ofstream(partial) << R"({"human_count": 7, "arena": {"width": 9, "height": 9}})";
  const ScenarioConfig p = load_scenario(partial);
  CHECK(p.human_count == 7);
  CHECK(p.arena_width == 9.0);
  CHECK(p.human_radius_max == 0.5);
  const std::string bad = (dir / "bad.json").string();
  std::ofstream(bad) << R"({"human_count": -3})";
  CHECK_THROWS_AS(load_scenario(bad), InputError);
}
