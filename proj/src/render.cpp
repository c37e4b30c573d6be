#include "crowdnav/render.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crowdnav/errors.hpp"

namespace crowdnav {

namespace {

constexpr double kScale = 50.0;  // px per metre

struct View {
  double half_w;
  double half_h;
  double x(double wx) const { return (wx + half_w) * kScale; }
  double y(double wy) const { return (half_h - wy) * kScale; }
};

void circle(std::ostringstream& s, const View& v, const Vec2& c, double r, const char* style) {
  s << "<circle cx=\"" << v.x(c.x) << "\" cy=\"" << v.y(c.y) << "\" r=\"" << r * kScale
    << "\" " << style << "/>\n";
}

}  // namespace

std::string render_frame_svg(const EpisodeTrace& trace, std::size_t step) {
  if (step >= trace.steps.size()) throw InputError("render: step out of range");
  const StepRecord& s = trace.steps[step];
  const View v{trace.arena_width / 2.0 + 1.0, trace.arena_height / 2.0 + 1.0};
  std::ostringstream out;
  out.precision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * v.half_w * kScale
      << "\" height=\"" << 2 * v.half_h * kScale << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<rect x=\"" << v.x(-trace.arena_width / 2) << "\" y=\"" << v.y(trace.arena_height / 2)
      << "\" width=\"" << trace.arena_width * kScale << "\" height=\""
      << trace.arena_height * kScale << "\" fill=\"none\" stroke=\"#999\"/>\n";

  const std::size_t humans = s.human_positions.size();
  const std::size_t k = trace.horizon > 0 ? static_cast<std::size_t>(trace.horizon) : 0;
  for (std::size_t h = 0; h < humans; ++h) {
    const double r = h < trace.human_radii.size() ? trace.human_radii[h] : 0.3;
    for (std::size_t j = 0; j < k && h * k + j < s.predictions.size(); ++j) {
      const Vec2& p = s.predictions[h * k + j];
      const double delta = h * k + j < s.radii.size() ? s.radii[h * k + j] : 0.0;
      circle(out, v, p, r + delta,
             "fill=\"lightblue\" fill-opacity=\"0.25\" stroke=\"steelblue\" stroke-opacity=\"0.4\"");
      circle(out, v, p, 0.04, "fill=\"steelblue\"");
    }
  }
  for (std::size_t h = 0; h < humans; ++h) {
    const double r = h < trace.human_radii.size() ? trace.human_radii[h] : 0.3;
    circle(out, v, s.human_positions[h], r, "fill=\"none\" stroke=\"black\" stroke-width=\"2\"");
  }
  circle(out, v, trace.robot_goal, 0.12, "fill=\"red\"");
  circle(out, v, s.robot_position, trace.robot_radius,
         s.danger ? "fill=\"orange\" stroke=\"black\"" : "fill=\"gold\" stroke=\"black\"");
  out << "<text x=\"8\" y=\"18\" font-family=\"monospace\" font-size=\"14\">t="
      << static_cast<double>(s.step) * trace.dt << "s " << to_string(s.event) << " C=" << s.cost
      << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

std::size_t render_trace(const EpisodeTrace& trace, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05zu.svg", i);
    const std::filesystem::path path = std::filesystem::path(dir) / name;
    std::ofstream out(path);
    if (!out) throw InputError("cannot write frame: " + path.string());
    out << render_frame_svg(trace, i);
  }
  return trace.steps.size();
}

}  // namespace crowdnav
