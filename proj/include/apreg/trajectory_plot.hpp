#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "apreg/geometry.hpp"

namespace apreg {

struct PlotSeries {
  std::string label;
  std::vector<RigidTransform> poses;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

/// Largest of {1,2,5}*10^k not exceeding the raw step.
inline double nice_step(double raw) {
  if (raw <= 0.0) return 1.0;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {5.0, 2.0, 1.0})
    if (m * mag <= raw) return m * mag;
  return mag;
}

}  // namespace detail

/// Top-down polyline plot of one or more trajectories: shared meter-scaled
/// axes with grid ticks, one color per series, legend, equal aspect.
/// axis_h / axis_v pick which world coordinates span the page (default x/y).
inline std::string trajectory_svg(const std::vector<PlotSeries>& series,
                                  int width = 720, int height = 720,
                                  int axis_h = 0, int axis_v = 1) {
  if (series.empty()) throw std::invalid_argument("trajectory_svg: no series");
  if (axis_h < 0 || axis_h > 2 || axis_v < 0 || axis_v > 2 || axis_h == axis_v)
    throw std::invalid_argument("trajectory_svg: bad axes");

  double lo_h = std::numeric_limits<double>::max(), hi_h = -lo_h;
  double lo_v = lo_h, hi_v = -lo_h;
  std::size_t total = 0;
  for (const auto& s : series) {
    for (const auto& p : s.poses) {
      double h = p.translation()[axis_h], v = p.translation()[axis_v];
      lo_h = std::min(lo_h, h), hi_h = std::max(hi_h, h);
      lo_v = std::min(lo_v, v), hi_v = std::max(hi_v, v);
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("trajectory_svg: no poses");
  double span = std::max({hi_h - lo_h, hi_v - lo_v, 1.0});
  double margin = 0.05 * span;
  double ch = (lo_h + hi_h) / 2.0, cv = (lo_v + hi_v) / 2.0;
  lo_h = ch - span / 2.0 - margin, hi_h = ch + span / 2.0 + margin;
  lo_v = cv - span / 2.0 - margin, hi_v = cv + span / 2.0 + margin;

  const double pad = 48.0;  // pixels reserved for tick labels
  double scale = std::min((width - 2 * pad) / (hi_h - lo_h),
                          (height - 2 * pad) / (hi_v - lo_v));
  auto px = [&](double h) { return pad + (h - lo_h) * scale; };
  auto py = [&](double v) { return height - pad - (v - lo_v) * scale; };

  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  static const char* kAxisName[] = {"x", "y", "z"};

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" viewBox=\"0 0 " + std::to_string(width) + " " +
         std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  double step = detail::nice_step((hi_h - lo_h) / 6.0);
  svg += "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  for (double t = std::ceil(lo_h / step) * step; t <= hi_h + 1e-12; t += step)
    svg += "<line x1=\"" + detail::fmt(px(t)) + "\" y1=\"" + detail::fmt(py(lo_v)) +
           "\" x2=\"" + detail::fmt(px(t)) + "\" y2=\"" + detail::fmt(py(hi_v)) +
           "\"/>\n";
  for (double t = std::ceil(lo_v / step) * step; t <= hi_v + 1e-12; t += step)
    svg += "<line x1=\"" + detail::fmt(px(lo_h)) + "\" y1=\"" + detail::fmt(py(t)) +
           "\" x2=\"" + detail::fmt(px(hi_h)) + "\" y2=\"" + detail::fmt(py(t)) +
           "\"/>\n";
  svg += "</g>\n";
  svg += "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#444444\">\n";
  for (double t = std::ceil(lo_h / step) * step; t <= hi_h + 1e-12; t += step)
    svg += "<text x=\"" + detail::fmt(px(t)) + "\" y=\"" +
           detail::fmt(height - pad + 16.0) + "\" text-anchor=\"middle\">" +
           detail::fmt(t) + "</text>\n";
  for (double t = std::ceil(lo_v / step) * step; t <= hi_v + 1e-12; t += step)
    svg += "<text x=\"" + detail::fmt(pad - 6.0) + "\" y=\"" +
           detail::fmt(py(t) + 4.0) + "\" text-anchor=\"end\">" + detail::fmt(t) +
           "</text>\n";
  svg += "<text x=\"" + detail::fmt(width / 2.0) + "\" y=\"" +
         detail::fmt(height - 8.0) + "\" text-anchor=\"middle\">" +
         std::string(kAxisName[axis_h]) + " [m]</text>\n";
  svg += "<text x=\"14\" y=\"" + detail::fmt(height / 2.0) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
         detail::fmt(height / 2.0) + ")\">" + std::string(kAxisName[axis_v]) +
         " [m]</text>\n";
  svg += "</g>\n";
  svg += "<rect x=\"" + detail::fmt(pad) + "\" y=\"" + detail::fmt(pad) +
         "\" width=\"" + detail::fmt(width - 2 * pad) + "\" height=\"" +
         detail::fmt(height - 2 * pad) +
         "\" fill=\"none\" stroke=\"#888888\"/>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
    const auto& poses = series[i].poses;
    if (poses.empty()) continue;
    std::string pts;
    for (const auto& p : poses) {
      if (!pts.empty()) pts += " ";
      pts += detail::fmt(px(p.translation()[axis_h])) + "," +
             detail::fmt(py(p.translation()[axis_v]));
    }
    svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"/>\n";
    svg += "<circle cx=\"" + detail::fmt(px(poses.front().translation()[axis_h])) +
           "\" cy=\"" + detail::fmt(py(poses.front().translation()[axis_v])) +
           "\" r=\"3\" fill=\"" + color + "\"/>\n";
  }

  double ly = pad + 14.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
    svg += "<line x1=\"" + detail::fmt(width - pad - 150.0) + "\" y1=\"" +
           detail::fmt(ly - 4.0) + "\" x2=\"" + detail::fmt(width - pad - 126.0) +
           "\" y2=\"" + detail::fmt(ly - 4.0) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + detail::fmt(width - pad - 120.0) + "\" y=\"" +
           detail::fmt(ly) +
           "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222222\">" +
           detail::xml_escape(series[i].label) + "</text>\n";
    ly += 18.0;
  }

  svg += "</svg>\n";
  return svg;
}

}  // namespace apreg
