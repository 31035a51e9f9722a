// SPDX-License-Identifier: Apache-2.0
//
// Trajectory plot as a standalone SVG: label-band shading (orange positive,
// cyan negative), the probability polyline with per-point prediction markers,
// and the 0.5 decision rule. Deterministic byte-for-byte for fixed input.
#ifndef LONGTRACK_SVG_HPP
#define LONGTRACK_SVG_HPP

#include <cstdio>
#include <fstream>
#include <string>

#include "longtrack/trajectory.hpp"

namespace longtrack {

namespace svg_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace svg_detail

inline std::string render_trajectory_svg(const Trajectory& t) {
  using svg_detail::num;
  if (t.points.empty()) fail(ErrorKind::WindowEmpty, "render_trajectory_svg: empty trajectory");

  constexpr double kWidth = 640.0, kHeight = 360.0;
  constexpr double kLeft = 56.0, kRight = 16.0, kTop = 28.0, kBottom = 44.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  const int day_lo = t.points.front().day;
  const int day_hi = t.points.back().day;
  const double day_span = std::max(1, day_hi - day_lo);
  auto x_of = [&](double day) { return kLeft + (day - day_lo) / day_span * plot_w; };
  auto y_of = [&](double p) { return kTop + (1.0 - p) * plot_h; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
         num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" fill=\"white\"/>\n";

  // label bands: contiguous runs of the same test result, split midway
  // between neighbouring samples
  for (std::size_t i = 0; i < t.points.size();) {
    std::size_t j = i;
    while (j + 1 < t.points.size() && t.points[j + 1].label == t.points[i].label) ++j;
    const double lo = i == 0 ? static_cast<double>(day_lo)
                             : (t.points[i].day + t.points[i - 1].day) / 2.0;
    const double hi = j + 1 == t.points.size() ? static_cast<double>(day_hi)
                                               : (t.points[j].day + t.points[j + 1].day) / 2.0;
    const char* fill = t.points[i].label == TestLabel::positive ? "#f4a261" : "#9ad8d8";
    svg += "<rect x=\"" + num(x_of(lo)) + "\" y=\"" + num(kTop) + "\" width=\"" +
           num(std::max(0.0, x_of(hi) - x_of(lo))) + "\" height=\"" + num(plot_h) + "\" fill=\"" +
           std::string(fill) + "\" fill-opacity=\"0.45\"/>\n";
    i = j + 1;
  }

  // axes and the 0.5 decision threshold
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) +
         "\" y2=\"" + num(kTop + plot_h) + "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + plot_h) + "\" x2=\"" +
         num(kLeft + plot_w) + "\" y2=\"" + num(kTop + plot_h) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(y_of(0.5)) + "\" x2=\"" +
         num(kLeft + plot_w) + "\" y2=\"" + num(y_of(0.5)) +
         "\" stroke=\"#555555\" stroke-width=\"1\" stroke-dasharray=\"6 4\"/>\n";
  for (double p : {0.0, 0.5, 1.0}) {
    svg += "<text x=\"" + num(kLeft - 8.0) + "\" y=\"" + num(y_of(p) + 4.0) +
           "\" font-size=\"12\" text-anchor=\"end\">" + num(p) + "</text>\n";
  }

  // day ticks: ~8 ticks snapped to a round step
  int step = 1;
  for (int cand : {1, 2, 5, 7, 14, 28, 56})
    if (day_span / cand <= 8) {
      step = cand;
      break;
    }
  for (int d = day_lo; d <= day_hi; d += step) {
    svg += "<line x1=\"" + num(x_of(d)) + "\" y1=\"" + num(kTop + plot_h) + "\" x2=\"" +
           num(x_of(d)) + "\" y2=\"" + num(kTop + plot_h + 5.0) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(x_of(d)) + "\" y=\"" + num(kTop + plot_h + 18.0) +
           "\" font-size=\"12\" text-anchor=\"middle\">" + std::to_string(d) + "</text>\n";
  }
  svg += "<text x=\"" + num(kLeft + plot_w / 2.0) + "\" y=\"" + num(kHeight - 8.0) +
         "\" font-size=\"13\" text-anchor=\"middle\">day</text>\n";
  svg += "<text x=\"" + num(kLeft + plot_w / 2.0) + "\" y=\"" + num(18.0) +
         "\" font-size=\"14\" text-anchor=\"middle\">participant " + t.participant_id +
         " probability of positive</text>\n";

  // probability polyline
  svg += "<polyline fill=\"none\" stroke=\"#1f4e79\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    if (i) svg += " ";
    svg += num(x_of(t.points[i].day)) + "," + num(y_of(t.points[i].probability));
  }
  svg += "\"/>\n";

  // prediction markers: plus for positive, dot for negative
  for (const auto& pt : t.points) {
    const double x = x_of(pt.day), y = y_of(pt.probability);
    if (pt.predicted_positive) {
      svg += "<path d=\"M " + num(x - 4.0) + " " + num(y) + " H " + num(x + 4.0) + " M " + num(x) +
             " " + num(y - 4.0) + " V " + num(y + 4.0) +
             "\" stroke=\"#b30000\" stroke-width=\"2\"/>\n";
    } else {
      svg += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) +
             "\" r=\"3\" fill=\"#1f4e79\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

inline void write_trajectory_svg(const std::string& path, const Trajectory& t) {
  const std::string svg = render_trajectory_svg(t);
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) fail(ErrorKind::IoFailure, "cannot write " + path);
  out << svg;
  if (!out) fail(ErrorKind::IoFailure, "short write to " + path);
}

}  // namespace longtrack

#endif  // LONGTRACK_SVG_HPP
