#include "crowdnav/trace.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "crowdnav/errors.hpp"

namespace crowdnav {

namespace {

nlohmann::json point(const Vec2& v) { return nlohmann::json::array({v.x, v.y}); }

nlohmann::json points(const std::vector<Vec2>& vs) {
  nlohmann::json a = nlohmann::json::array();
  for (const Vec2& v : vs) a.push_back(point(v));
  return a;
}

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

Vec2 to_point(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

std::vector<Vec2> to_points(const nlohmann::json& j) {
  std::vector<Vec2> out;
  out.reserve(j.size());
  for (const auto& p : j) out.push_back(to_point(p));
  return out;
}

double to_number(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

nlohmann::json trace_header_json(const EpisodeTrace& t) {
  return {{"type", "header"},
          {"scenario", t.scenario},
          {"seed", t.seed},
          {"config_hash", t.config_hash},
          {"dt", t.dt},
          {"arena", {t.arena_width, t.arena_height}},
          {"robot_radius", t.robot_radius},
          {"robot_start", point(t.robot_start)},
          {"robot_goal", point(t.robot_goal)},
          {"human_radii", t.human_radii},
          {"human_start", points(t.human_start)},
          {"horizon", t.horizon}};
}

nlohmann::json step_json(const StepRecord& s) {
  return {{"type", "step"},
          {"t", s.step},
          {"robot", point(s.robot_position)},
          {"robot_velocity", point(s.robot_velocity)},
          {"action", point(s.action)},
          {"humans", points(s.human_positions)},
          {"human_velocities", points(s.human_velocities)},
          {"event", std::string(to_string(s.event))},
          {"reward", s.reward},
          {"cost", s.cost},
          {"intrusion", s.intrusion},
          {"predictions", points(s.predictions)},
          {"radii", s.radii},
          {"danger", s.danger},
          {"danger_distance", number(s.danger_distance)}};
}

void write_trace(std::ostream& out, const EpisodeTrace& trace) {
  out << trace_header_json(trace).dump() << '\n';
  for (const StepRecord& s : trace.steps) out << step_json(s).dump() << '\n';
}

void write_traces(const std::string& path, const std::vector<EpisodeTrace>& traces) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write trace: " + path);
  for (const EpisodeTrace& t : traces) write_trace(out, t);
}

std::vector<EpisodeTrace> read_traces(std::istream& in) {
  std::vector<EpisodeTrace> traces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        EpisodeTrace t;
        t.scenario = j.at("scenario").get<std::string>();
        t.seed = j.at("seed").get<std::uint64_t>();
        t.config_hash = j.at("config_hash").get<std::string>();
        t.dt = j.at("dt").get<double>();
        t.arena_width = j.at("arena").at(0).get<double>();
        t.arena_height = j.at("arena").at(1).get<double>();
        t.robot_radius = j.at("robot_radius").get<double>();
        t.robot_start = to_point(j.at("robot_start"));
        t.robot_goal = to_point(j.at("robot_goal"));
        t.human_radii = j.at("human_radii").get<std::vector<double>>();
        t.human_start = to_points(j.at("human_start"));
        t.horizon = j.at("horizon").get<int>();
        traces.push_back(std::move(t));
      } else if (type == "step") {
        if (traces.empty()) throw InputError("step record before any header");
        StepRecord s;
        s.step = j.at("t").get<int>();
        s.robot_position = to_point(j.at("robot"));
        s.robot_velocity = to_point(j.at("robot_velocity"));
        s.action = to_point(j.at("action"));
        s.human_positions = to_points(j.at("humans"));
        s.human_velocities = to_points(j.at("human_velocities"));
        s.event = event_from_string(j.at("event").get<std::string>());
        s.reward = j.at("reward").get<double>();
        s.cost = j.at("cost").get<double>();
        s.intrusion = j.at("intrusion").get<double>();
        s.predictions = to_points(j.at("predictions"));
        s.radii = j.at("radii").get<std::vector<double>>();
        s.danger = j.at("danger").get<bool>();
        s.danger_distance = to_number(j.at("danger_distance"));
        traces.back().steps.push_back(std::move(s));
      } else {
        throw InputError("unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError("trace line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw InputError("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return traces;
}

std::vector<EpisodeTrace> read_traces(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open trace: " + path);
  return read_traces(in);
}

}  // namespace crowdnav
