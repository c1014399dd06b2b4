#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace gdse {

struct ChartSeries {
  std::string name;
  std::vector<double> y;     // indexed by iteration
  std::vector<double> band;  // +-1 SE half-width; empty = no band
};

namespace detail {
inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}
}  // namespace detail

// Minimal static line chart: x axis is the iteration index, shaded bands are
// +-1 standard error around each series mean.
inline void svg_line_chart(const std::string& path, const std::string& title,
                           const std::string& ylabel,
                           const std::vector<ChartSeries>& series) {
  const double W = 640, H = 420, ml = 64, mr = 16, mt = 40, mb = 44;
  const double pw = W - ml - mr, ph = H - mt - mb;
  size_t T = 0;
  double ymin = 0.0, ymax = 1e-12;
  for (const auto& s : series) {
    T = std::max(T, s.y.size());
    for (size_t i = 0; i < s.y.size(); ++i) {
      double b = i < s.band.size() ? s.band[i] : 0.0;
      ymin = std::min(ymin, s.y[i] - b);
      ymax = std::max(ymax, s.y[i] + b);
    }
  }
  if (T < 2) T = 2;
  double yr = ymax - ymin;
  ymax += 0.05 * yr;
  ymin -= 0.05 * yr;
  yr = ymax - ymin;
  auto px = [&](double t) { return ml + pw * t / double(T - 1); };
  auto py = [&](double v) { return mt + ph * (1.0 - (v - ymin) / yr); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                 "#9467bd", "#ff7f0e", "#8c564b"};
  std::ofstream out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << title
      << "</text>\n";
  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  for (int g = 0; g <= 4; ++g) {
    double v = ymin + yr * g / 4.0;
    out << "<text x=\"" << ml - 6 << "\" y=\"" << py(v) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << detail::fmt(v) << "</text>\n";
    double tx = double(T - 1) * g / 4.0;
    out << "<text x=\"" << px(tx) << "\" y=\"" << mt + ph + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << detail::fmt(tx) << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">iteration</text>\n";
  out << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" transform=\"rotate(-90 16 " << mt + ph / 2
      << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">"
      << ylabel << "</text>\n";
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* col = colors[si % 6];
    if (!s.band.empty()) {
      out << "<polygon fill=\"" << col << "\" fill-opacity=\"0.15\" "
          << "stroke=\"none\" points=\"";
      for (size_t i = 0; i < s.y.size(); ++i)
        out << detail::fmt(px(double(i))) << ","
            << detail::fmt(py(s.y[i] + s.band[i])) << " ";
      for (size_t i = s.y.size(); i-- > 0;)
        out << detail::fmt(px(double(i))) << ","
            << detail::fmt(py(s.y[i] - s.band[i])) << " ";
      out << "\"/>\n";
    }
    out << "<polyline fill=\"none\" stroke=\"" << col
        << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < s.y.size(); ++i)
      out << detail::fmt(px(double(i))) << "," << detail::fmt(py(s.y[i]))
          << " ";
    out << "\"/>\n";
    out << "<text x=\"" << ml + pw - 8 << "\" y=\"" << mt + 16 + 16 * si
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"12\" fill=\""
        << col << "\">" << s.name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace gdse
