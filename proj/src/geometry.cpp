#include "crowdnav/geometry.hpp"

namespace crowdnav {

Vec2 normalized(const Vec2& v) {
  const double n = v.norm();
  if (n == 0.0) return v;
  return v / n;
}

Vec2 uniform_in_box(Rng& rng, double width, double height) {
  std::uniform_real_distribution<double> ux(-0.5 * width, 0.5 * width);
  std::uniform_real_distribution<double> uy(-0.5 * height, 0.5 * height);
  const double x = ux(rng);
  const double y = uy(rng);
  return {x, y};
}

}  // namespace crowdnav
