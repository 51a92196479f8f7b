#ifndef V2VQA_GEOMETRY_HPP
#define V2VQA_GEOMETRY_HPP

// Planar geometry shared by QA generation and evaluation.
//
// Frame convention: every frame (world and ego) is "x forward, y right".
// A pose with yaw θ has heading (cos θ, -sin θ) and right axis
// (sin θ, cos θ) in the frame it lives in, so to_ego is the rotation
// R(θ) = [[cos, -sin], [sin, cos]] applied to (p - position).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace v2vqa {

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Point2 operator*(Point2 a, double s) { return {a.x * s, a.y * s}; }
  friend constexpr Point2 operator*(double s, Point2 a) { return {a.x * s, a.y * s}; }
  friend constexpr bool operator==(Point2, Point2) = default;
};

inline constexpr double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline constexpr double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }
inline bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

struct Pose2 {
  Point2 position;
  double yaw = 0.0;
};

/// Unit heading of a yaw angle.
inline Point2 heading_of(double yaw) { return {std::cos(yaw), -std::sin(yaw)}; }

/// Yaw whose heading points along `dir` (dir must be non-zero).
inline double yaw_of(Point2 dir) { return std::atan2(-dir.y, dir.x); }

inline Point2 rotate(Point2 v, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// World point expressed in the frame of `pose` (x forward, y right).
inline Point2 to_ego(Point2 p, const Pose2& pose) { return rotate(p - pose.position, pose.yaw); }

/// Inverse of to_ego.
inline Point2 from_ego(Point2 e, const Pose2& pose) { return rotate(e, -pose.yaw) + pose.position; }

/// World yaw re-expressed relative to `pose`.
inline double yaw_to_ego(double yaw, const Pose2& pose) { return normalize_angle(yaw - pose.yaw); }
inline double yaw_from_ego(double yaw, const Pose2& pose) { return normalize_angle(yaw + pose.yaw); }

struct OrientedBox {
  Point2 center;
  double z_center = 0.75;
  double length = 4.0;  // along heading
  double width = 2.0;
  double height = 1.5;
  double yaw = 0.0;

  Pose2 pose() const { return {center, yaw}; }
  double area() const { return length * width; }
};

inline bool is_valid(const OrientedBox& b) {
  return is_finite(b.center) && std::isfinite(b.z_center) && std::isfinite(b.yaw) &&
         b.length > 0.0 && b.width > 0.0 && b.height > 0.0 && std::isfinite(b.length) &&
         std::isfinite(b.width) && std::isfinite(b.height);
}

/// Footprint corners in counter-clockwise order (positive shoelace area).
inline std::array<Point2, 4> corners(const OrientedBox& b) {
  const double hl = b.length / 2.0, hw = b.width / 2.0;
  const std::array<Point2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<Point2, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) out[i] = from_ego(local[i], b.pose());
  return out;
}

/// Closed-footprint containment.
inline bool point_in_box(Point2 p, const OrientedBox& b) {
  const Point2 local = to_ego(p, b.pose());
  constexpr double eps = 1e-9;
  return std::abs(local.x) <= b.length / 2.0 + eps && std::abs(local.y) <= b.width / 2.0 + eps;
}

using Polygon = std::vector<Point2>;

inline double signed_area(std::span<const Point2> poly) {
  if (poly.size() < 3) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) s += cross(poly[i], poly[(i + 1) % n]);
  return s / 2.0;
}

/// Intersection of two convex polygons, both counter-clockwise
/// (Sutherland–Hodgman: clip `subject` by every edge of `clip`).
inline Polygon clip_convex(Polygon subject, std::span<const Point2> clip) {
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !subject.empty(); ++e) {
    const Point2 a = clip[e], b = clip[(e + 1) % m];
    const Point2 edge = b - a;
    Polygon out;
    out.reserve(subject.size() + 2);
    const std::size_t n = subject.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 p = subject[i], q = subject[(i + 1) % n];
      const double sp = cross(edge, p - a), sq = cross(edge, q - a);
      const bool p_in = sp >= 0.0, q_in = sq >= 0.0;
      if (p_in != q_in) {
        const double t = sp / (sp - sq);
        out.push_back(p + (q - p) * t);
      }
      if (q_in) out.push_back(q);
    }
    subject = std::move(out);
  }
  return subject;
}

inline constexpr double kZeroArea = 1e-12;

/// BEV footprint intersection area; anything at or below 1e-12 m² is zero.
inline double intersection_area(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = corners(a), cb = corners(b);
  const Polygon inter = clip_convex(Polygon(ca.begin(), ca.end()), cb);
  const double area = std::abs(signed_area(inter));
  return area <= kZeroArea ? 0.0 : area;
}

inline double bev_iou(const OrientedBox& a, const OrientedBox& b) {
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Positive BEV overlap plus overlapping vertical bands. Contact of
/// measure zero (shared edge or corner) is not a collision.
inline bool boxes_collide(const OrientedBox& a, const OrientedBox& b) {
  const double a_lo = a.z_center - a.height / 2.0, a_hi = a.z_center + a.height / 2.0;
  const double b_lo = b.z_center - b.height / 2.0, b_hi = b.z_center + b.height / 2.0;
  if (a_hi < b_lo || b_hi < a_lo) return false;
  return intersection_area(a, b) > 0.0;
}

struct Sector {
  Point2 apex;
  Point2 axis{1.0, 0.0};  // unit
  double half_angle = deg2rad(15.0);
  double range = 30.0;
};

inline bool is_valid(const Sector& s) {
  return is_finite(s.apex) && std::abs(norm(s.axis) - 1.0) < 1e-9 && s.half_angle > 0.0 &&
         s.half_angle < kPi / 2.0 && s.range > 0.0;
}

inline bool sector_contains(const Sector& s, Point2 p) {
  const Point2 v = p - s.apex;
  const double r = norm(v);
  if (!(r > 0.0) || r > s.range) return false;
  const double angle = std::atan2(std::abs(cross(s.axis, v)), dot(s.axis, v));
  return angle <= s.half_angle;
}

enum class DirectionLabel { front, front_right, back_right, back, back_left, front_left };

inline constexpr std::array<DirectionLabel, 6> kAllDirections{
    DirectionLabel::front, DirectionLabel::front_right, DirectionLabel::back_right,
    DirectionLabel::back,  DirectionLabel::back_left,   DirectionLabel::front_left};

inline std::string_view to_string(DirectionLabel d) {
  switch (d) {
    case DirectionLabel::front: return "front";
    case DirectionLabel::front_right: return "front_right";
    case DirectionLabel::back_right: return "back_right";
    case DirectionLabel::back: return "back";
    case DirectionLabel::back_left: return "back_left";
    case DirectionLabel::front_left: return "front_left";
  }
  return "front";
}

inline DirectionLabel direction_from_string(std::string_view s) {
  for (auto d : kAllDirections)
    if (to_string(d) == s) return d;
  throw GeometryError("unknown direction label: " + std::string(s));
}

/// Which of the six 60° wedges contains the ego-frame bearing of `p_ego`.
/// Wedges are centered on 0°, 60°, 120°, 180°, -120°, -60° and closed on
/// their counter-bearing side, e.g. front = [-30°, 30°).
inline DirectionLabel direction_of(Point2 p_ego) {
  if (p_ego.x == 0.0 && p_ego.y == 0.0) throw GeometryError("undefined direction for the origin");
  const double bearing = rad2deg(std::atan2(p_ego.y, p_ego.x));  // (-180, 180]
  const int wedge = static_cast<int>(std::floor((bearing + 30.0) / 60.0));
  return kAllDirections[static_cast<std::size_t>((wedge + 6) % 6)];
}

struct TimedPose {
  double t = 0.0;
  Pose2 pose;
};

struct HorizonExceedsLog : GeometryError {
  using GeometryError::GeometryError;
};

/// `count` positions at t0 + k * horizon / count (k = 1..count), linearly
/// interpolated between the samples of `traj` (sorted by time).
inline std::vector<Point2> interpolate_waypoints(std::span<const TimedPose> traj, double t0,
                                                 double horizon, int count) {
  if (count < 1) throw GeometryError("waypoint count must be >= 1");
  constexpr double eps = 1e-6;
  if (traj.empty() || t0 < traj.front().t - eps || t0 + horizon > traj.back().t + eps)
    throw HorizonExceedsLog("horizon-exceeds-log");
  std::vector<Point2> out;
  out.reserve(static_cast<std::size_t>(count));
  std::size_t seg = 0;
  for (int k = 1; k <= count; ++k) {
    const double t = t0 + horizon * k / count;
    while (seg + 1 < traj.size() && traj[seg + 1].t < t) ++seg;
    if (seg + 1 >= traj.size()) {
      out.push_back(traj.back().pose.position);
      continue;
    }
    const TimedPose& a = traj[seg];
    const TimedPose& b = traj[seg + 1];
    const double span = b.t - a.t;
    const double u = span > 0.0 ? std::clamp((t - a.t) / span, 0.0, 1.0) : 1.0;
    out.push_back(a.pose.position + (b.pose.position - a.pose.position) * u);
  }
  return out;
}

/// Heading at each waypoint from the direction of travel out of the previous
/// one (`start` for the first); degenerate segments keep the prior heading.
inline std::vector<double> headings_along(Point2 start, double start_yaw,
                                          std::span<const Point2> waypoints) {
  std::vector<double> yaws;
  yaws.reserve(waypoints.size());
  Point2 prev = start;
  double yaw = start_yaw;
  for (const Point2& w : waypoints) {
    const Point2 d = w - prev;
    if (norm(d) > 1e-6) yaw = yaw_of(d);
    yaws.push_back(yaw);
    prev = w;
  }
  return yaws;
}

inline double segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

inline double polyline_distance(Point2 p, std::span<const Point2> waypoints) {
  if (waypoints.empty()) throw GeometryError("polyline_distance: empty waypoint list");
  if (waypoints.size() == 1) return distance(p, waypoints.front());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i)
    best = std::min(best, segment_distance(p, waypoints[i], waypoints[i + 1]));
  return best;
}

}  // namespace v2vqa

#endif  // V2VQA_GEOMETRY_HPP
