#ifndef V2VQA_TEMPLATES_HPP
#define V2VQA_TEMPLATES_HPP

// Frozen text templates. Every rendered question and answer in a dataset
// comes from this catalog; changing a string here changes dataset bytes.
//
// Placeholders: {loc} one "(x, y)" pair, {locs} a comma-separated list of
// pairs, {dir} a direction phrase.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>

#include "v2vqa/geometry.hpp"

namespace v2vqa::templates {

inline constexpr std::string_view kQ1Question = "Is there any object at location {loc}?";
inline constexpr std::string_view kQ1Positive = "There is an object at location {loc}.";
inline constexpr std::string_view kQ1Negative = "There is no object at the given location.";

inline constexpr std::string_view kQ2Question =
    "Is there any object behind the object at location {loc}?";
inline constexpr std::string_view kQ3Question =
    "Is there any object behind the closest object in the {dir} direction?";
inline constexpr std::string_view kBehindPositive = "There is an object behind it at location {loc}.";
inline constexpr std::string_view kBehindNegative = "There is no object behind the reference object.";

inline constexpr std::string_view kQ4Question =
    "The planned future waypoints are {locs}. Which objects are notable near this trajectory?";
inline constexpr std::string_view kQ4Positive = "Notable objects are at locations {locs}.";
inline constexpr std::string_view kQ4Negative =
    "There is no notable object near the planned trajectory.";

inline constexpr std::string_view kQ5Question =
    "What are the suggested future waypoints for the next 3 seconds?";
inline constexpr std::string_view kQ5Answer = "The suggested future waypoints are {locs}.";

/// Phrase used in Q3 text, e.g. "front-right".
inline std::string direction_phrase(DirectionLabel d) {
  std::string s(to_string(d));
  for (char& c : s)
    if (c == '_') c = '-';
  return s;
}

inline DirectionLabel direction_from_phrase(std::string_view phrase) {
  for (auto d : kAllDirections)
    if (direction_phrase(d) == phrase) return d;
  throw GeometryError("unknown direction phrase: " + std::string(phrase));
}

/// Snaps a coordinate onto the rendering grid; never returns -0.0.
/// For step = 1/n the result is the double nearest k/n, which is exactly
/// what parsing the rendered decimal yields.
inline double quantize(double v, double step = 0.1) {
  const double inv = 1.0 / step;
  double out;
  if (std::abs(inv - std::round(inv)) < 1e-9)
    out = std::round(v * std::round(inv)) / std::round(inv);
  else
    out = std::round(v / step) * step;
  return out == 0.0 ? 0.0 : out;
}

inline Point2 quantize(Point2 p, double step = 0.1) { return {quantize(p.x, step), quantize(p.y, step)}; }

/// Decimal places for a power-of-ten step (0.1 -> 1).
inline int decimals_for(double step) {
  return std::max(0, static_cast<int>(std::lround(-std::log10(step))));
}

inline std::string format_coord(double v, double step = 0.1) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals_for(step), quantize(v, step));
  return buf;
}

inline std::string format_location(Point2 p, double step = 0.1) {
  return "(" + format_coord(p.x, step) + ", " + format_coord(p.y, step) + ")";
}

inline std::string format_locations(std::span<const Point2> pts, double step = 0.1) {
  std::string out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) out += ", ";
    out += format_location(pts[i], step);
  }
  return out;
}

inline std::string fill(std::string_view tmpl, std::string_view key, std::string_view value) {
  std::string out(tmpl);
  if (auto pos = out.find(key); pos != std::string::npos) out.replace(pos, key.size(), value);
  return out;
}

}  // namespace v2vqa::templates

#endif  // V2VQA_TEMPLATES_HPP
