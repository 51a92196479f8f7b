#ifndef V2VQA_STATS_HPP
#define V2VQA_STATS_HPP

// Distribution of ground-truth answer locations in the asker's ego frame:
// every answer location for Q1-Q4 and the final waypoint for Q5.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "v2vqa/qagen.hpp"

namespace v2vqa {

struct HistogramAxis {
  const char* name;
  double lo;
  double hi;
  double width;

  std::size_t bins() const { return static_cast<std::size_t>(std::lround((hi - lo) / width)); }
  /// Out-of-range values land in the first or last bin.
  std::size_t bin_of(double v) const {
    const double b = std::floor((v - lo) / width);
    return static_cast<std::size_t>(std::clamp(b, 0.0, static_cast<double>(bins() - 1)));
  }
};

inline const std::array<HistogramAxis, 4>& histogram_axes() {
  static const std::array<HistogramAxis, 4> axes{{{"x", -100.0, 100.0, 10.0},
                                                  {"y", -100.0, 100.0, 10.0},
                                                  {"distance", 0.0, 100.0, 10.0},
                                                  {"bearing", -180.0, 180.0, 30.0}}};
  return axes;
}

/// Points whose distribution is reported for one pair.
inline std::vector<Point2> answer_locations(const QaPair& p) {
  if (p.qa_type == QaType::Q5) {
    if (p.answer.empty()) return {};
    return {p.answer.back()};
  }
  return p.answer;
}

struct AnswerStats {
  std::map<QaType, TypeCounts> counts;
  // [type][axis][bin]
  std::map<QaType, std::array<std::vector<std::size_t>, 4>> histograms;
};

inline AnswerStats compute_stats(const QaDataset& ds) {
  AnswerStats s;
  s.counts = count_by_type(ds);
  const auto& axes = histogram_axes();
  for (const auto& p : ds.pairs) {
    for (Point2 a : answer_locations(p)) {
      auto& h = s.histograms[p.qa_type];
      const std::array<double, 4> values{a.x, a.y, norm(a), rad2deg(std::atan2(a.y, a.x))};
      for (std::size_t i = 0; i < 4; ++i) {
        if (h[i].empty()) h[i].assign(axes[i].bins(), 0);
        ++h[i][axes[i].bin_of(values[i])];
      }
    }
  }
  return s;
}

/// Types with no pairs are omitted, so an empty dataset gives the header only.
inline void write_counts_csv(std::ostream& out, const AnswerStats& s) {
  out << "qa_type,total,positive,negative\n";
  for (const auto& [t, c] : s.counts) {
    if (c.total == 0) continue;
    out << to_string(t) << ',' << c.total << ',' << c.positive << ',' << c.negative << '\n';
  }
}

/// Long format; types without answer locations contribute no rows.
inline void write_histogram_csv(std::ostream& out, const AnswerStats& s) {
  out << "qa_type,axis,bin_lo,bin_hi,count\n";
  const auto& axes = histogram_axes();
  for (const auto& [t, h] : s.histograms)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t b = 0; b < h[i].size(); ++b) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s,%s,%g,%g,%zu\n", std::string(to_string(t)).c_str(),
                      axes[i].name, axes[i].lo + axes[i].width * static_cast<double>(b),
                      axes[i].lo + axes[i].width * static_cast<double>(b + 1), h[i][b]);
        out << buf;
      }
}

}  // namespace v2vqa

#endif  // V2VQA_STATS_HPP
