#include <doctest.h>

#include <cmath>

#include "crowdnav/errors.hpp"
#include "crowdnav/scenario.hpp"
#include "crowdnav/world.hpp"

using namespace crowdnav;

namespace {

WorldState empty_world() {
  WorldState w;
  w.robot.position = {0.0, 0.0};
  w.robot.goal = {1.0, 0.0};
  w.crowd.resample.period = 0;
  return w;
}

AgentState human_at(Vec2 p, double r, Vec2 goal = {5.0, 5.0}) {
  AgentState h;
  h.position = p;
  h.radius = r;
  h.goal = goal;
  return h;
}

}  // namespace

TEST_CASE("clamp_velocity keeps short vectors and rescales long ones") {
  const Vec2 a = clamp_velocity({0.6, 0.8}, 1.0);
  CHECK(a.x == doctest::Approx(0.6));
  CHECK(a.y == doctest::Approx(0.8));
  const Vec2 b = clamp_velocity({3.0, 4.0}, 1.0);
  CHECK(b.x == doctest::Approx(0.6));
  CHECK(b.y == doctest::Approx(0.8));
  const Vec2 c = clamp_velocity({0.0, 0.0}, 2.5);
  CHECK(c.x == 0.0);
  CHECK(c.y == 0.0);
  CHECK_THROWS_AS(clamp_velocity({1.0, 0.0}, 0.0), InputError);
}

TEST_CASE("hand Euler step toward the goal") {
  WorldState w = empty_world();
  const Transition tr = step_episode(w, {1.0, 0.0});
  CHECK(tr.next_state.robot.position.x == doctest::Approx(0.25));
  CHECK(tr.next_state.robot.position.y == doctest::Approx(0.0));
  CHECK(tr.robot_displacement_toward_goal == doctest::Approx(0.25));
  CHECK(tr.event == Event::Running);
  CHECK(tr.next_state.step_index == 1);
}

TEST_CASE("robot slides along the arena edge unless unconfined") {
  WorldState w = empty_world();
  w.crowd.arena_width = 4.0;
  w.crowd.arena_height = 4.0;
  w.robot.radius = 0.2;
  w.robot.max_speed = 1.0;
  w.robot.position = {1.7, 0.0};
  w.robot.goal = {-1.0, 0.0};
  const Transition t = step_episode(w, {0.6, 0.8});
  CHECK(t.next_state.robot.position.x == doctest::Approx(1.8));
  CHECK(t.next_state.robot.position.y == doctest::Approx(0.2));
  CHECK(t.next_state.robot.velocity.x == doctest::Approx(0.4));
  CHECK(t.next_state.robot.velocity.y == doctest::Approx(0.8));

  w.crowd.confine_robot = false;
  CHECK(step_episode(w, {0.6, 0.8}).next_state.robot.position.x == doctest::Approx(1.85));
}

TEST_CASE("robot at the goal centre reaches it") {
  WorldState w = empty_world();
  w.robot.goal = {0.0, 0.0};
  CHECK(step_episode(w, {0.0, 0.0}).event == Event::ReachedGoal);
}

TEST_CASE("collision when centres are closer than the radius sum") {
  WorldState w = empty_world();
  w.robot.goal = {-3.0, 0.0};
  AgentState h = human_at({0.3, 0.0}, 0.3, {0.3, 0.0});
  w.humans.push_back(h);
  const Transition tr = step_episode(w, {0.0, 0.0});
  CHECK(tr.event == Event::Collision);
  CHECK(tr.next_state.terminated);
}

TEST_CASE("collision takes precedence over reaching the goal") {
  WorldState w = empty_world();
  w.robot.goal = {0.0, 0.0};
  w.humans.push_back(human_at({0.3, 0.0}, 0.3, {0.3, 0.0}));
  CHECK(step_episode(w, {0.0, 0.0}).event == Event::Collision);
}

TEST_CASE("timeout after ceil(T/dt) steps and never beyond") {
  WorldState w = empty_world();
  w.robot.goal = {100.0, 0.0};
  w.time_limit = 1.1;  // ceil(1.1 / 0.25) = 5
  CHECK(w.max_steps() == 5);
  int steps = 0;
  Event e = Event::Running;
  while (e == Event::Running) {
    Transition tr = step_episode(w, {0.0, 0.0});
    w = tr.next_state;
    e = tr.event;
    ++steps;
  }
  CHECK(e == Event::Timeout);
  CHECK(steps == 5);
  CHECK_THROWS_AS(step_episode(w, {0.0, 0.0}), StateError);
}

TEST_CASE("non-finite action is rejected") {
  WorldState w = empty_world();
  CHECK_THROWS_AS(step_episode(w, {std::nan(""), 0.0}), InputError);
  CHECK_THROWS_AS(step_episode(w, {INFINITY, 0.0}), InputError);
}

TEST_CASE("human-human contact is counted but not terminal") {
  WorldState w = empty_world();
  w.robot.goal = {-5.0, 0.0};
  w.humans.push_back(human_at({3.0, 3.0}, 0.3, {3.0, 3.0}));
  w.humans.push_back(human_at({3.2, 3.0}, 0.3, {3.2, 3.0}));
  w.humans[1].id = 1;
  const Transition tr = step_episode(w, {0.0, 0.0});
  CHECK(tr.human_contacts >= 1);
  CHECK(tr.event == Event::Running);
}

TEST_CASE("speed bound and determinism over full episodes") {
  ScenarioConfig c;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    WorldState a = spawn_scenario(c, seed);
    WorldState b = spawn_scenario(c, seed);
    for (int t = 0; t < 60 && !a.terminated; ++t) {
      const Vec2 act{std::cos(0.1 * t) * 2.0, std::sin(0.1 * t) * 2.0};
      Transition ta = step_episode(a, act);
      Transition tb = step_episode(b, act);
      a = ta.next_state;
      b = tb.next_state;
      CHECK(ta.event == tb.event);
      CHECK(a.robot.velocity.norm() <= a.robot.max_speed + 1e-9);
      for (std::size_t i = 0; i < a.humans.size(); ++i) {
        CHECK(a.humans[i].velocity.norm() <= a.humans[i].max_speed + 1e-9);
        CHECK(a.humans[i].position.x == b.humans[i].position.x);
        CHECK(a.humans[i].position.y == b.humans[i].position.y);
      }
      CHECK(a.step_index * a.dt <= a.time_limit + 1e-9);
    }
  }
}

TEST_CASE("event strings round-trip") {
  for (Event e : {Event::Running, Event::ReachedGoal, Event::Collision, Event::Timeout}) {
    CHECK(event_from_string(to_string(e)) == e);
  }
  CHECK_THROWS_AS(event_from_string("exploded"), InputError);
}
