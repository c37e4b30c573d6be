#pragma once

#include <string>

#include "crowdnav/metrics.hpp"

namespace crowdnav {

/// One SVG frame: arena, humans, robot and goal, predicted points, and
/// semi-transparent uncertainty discs of radius r_h + delta_hat around them.
std::string render_frame_svg(const EpisodeTrace& trace, std::size_t step);

/// Writes frame_00000.svg ... into `dir` (created if missing). Returns the
/// number of frames.
std::size_t render_trace(const EpisodeTrace& trace, const std::string& dir);

}  // namespace crowdnav
