#pragma once

#include <cmath>

namespace scendbg::geom {

inline double euclid(double x0, double y0, double x1, double y1) {
  return std::sqrt((x1 - x0) * (x1 - x0) + (y1 - y0) * (y1 - y0));
}

inline double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0) w += 360.0;
  return w;
}

/// Minimal angular difference between two compass headings, in [0, 180].
inline double heading_diff_deg(double a, double b) {
  double d = std::fabs(wrap_degrees(a) - wrap_degrees(b));
  return d > 180.0 ? 360.0 - d : d;
}

/// Compass bearing from (x0,y0) to (x1,y1): 0 = +y (north), clockwise.
inline double bearing_deg(double x0, double y0, double x1, double y1) {
  return wrap_degrees(std::atan2(x1 - x0, y1 - y0) * 180.0 / 3.141592653589793238462643383);
}

/// View-cone membership used both by the DSL builtin and the world model:
/// target center within max_range of the viewer and within +-half_angle of
/// the viewer heading. Both boundaries inclusive.
inline bool in_view_cone(double vx, double vy, double vheading, double tx, double ty,
                         double half_angle_deg, double max_range) {
  if (euclid(vx, vy, tx, ty) > max_range) return false;
  double off = heading_diff_deg(bearing_deg(vx, vy, tx, ty), vheading);
  return off <= half_angle_deg;
}

}  // namespace scendbg::geom
