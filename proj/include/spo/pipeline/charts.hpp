#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace spo::pipeline {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 400;
};

namespace detail {

inline std::string fmt(double v, const char* f = "%.4g") {
  char buf[32];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

// Plain SVG line chart with axes, four ticks per axis and a legend.
inline std::string svg_line_chart(const ChartSpec& spec, const std::vector<Series>& series) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  const double left = 64, right = 150, top = 36, bottom = 48;
  const double pw = spec.width - left - right, ph = spec.height - top - bottom;

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  auto sx = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
  auto sy = [&](double v) { return top + (1.0 - (v - y0) / (y1 - y0)) * ph; };

  using detail::fmt;
  std::string o = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) + "\" height=\"" +
                  std::to_string(spec.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
       detail::escape_xml(spec.title) + "</text>\n";
  o += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
       "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    o += "<text x=\"" + fmt(sx(xv)) + "\" y=\"" + fmt(top + ph + 16) + "\" text-anchor=\"middle\">" + fmt(xv) +
         "</text>\n";
    o += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(sy(yv) + 4) + "\" text-anchor=\"end\">" + fmt(yv) + "</text>\n";
    o += "<line x1=\"" + fmt(left) + "\" x2=\"" + fmt(left + pw) + "\" y1=\"" + fmt(sy(yv)) + "\" y2=\"" + fmt(sy(yv)) +
         "\" stroke=\"#eee\"/>\n";
  }
  o += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(spec.height - 10.0) + "\" text-anchor=\"middle\">" +
       detail::escape_xml(spec.x_label) + "</text>\n";
  o += "<text transform=\"translate(14," + fmt(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       detail::escape_xml(spec.y_label) + "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % 6];
    std::string pts;
    for (std::size_t i = 0; i < std::min(series[s].x.size(), series[s].y.size()); ++i) {
      if (!std::isfinite(series[s].x[i]) || !std::isfinite(series[s].y[i])) continue;
      pts += fmt(sx(series[s].x[i]), "%.2f") + "," + fmt(sy(series[s].y[i]), "%.2f") + " ";
    }
    o += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
         "\"/>\n";
    const double ly = top + 14 + 16 * static_cast<double>(s);
    o += "<line x1=\"" + fmt(left + pw + 10) + "\" x2=\"" + fmt(left + pw + 28) + "\" y1=\"" + fmt(ly - 4) +
         "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + fmt(left + pw + 32) + "\" y=\"" + fmt(ly) + "\">" + detail::escape_xml(series[s].name) +
         "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

}  // namespace spo::pipeline
