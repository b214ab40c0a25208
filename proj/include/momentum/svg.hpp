#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "momentum/core.hpp"

namespace momentum {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

struct PlotStyle {
  bool log_x = false;
  bool log_y = false;
  std::string title;
};

/// Deterministic SVG emission: fixed 800x600 canvas, one polyline per
/// series, byte-stable for identical input.
inline std::string emit_plot(const std::vector<PlotSeries>& series,
                             const PlotStyle& style = {}) {
  if (series.empty()) throw EmptySeries("emit_plot: no series");
  constexpr double W = 800, H = 600, ML = 70, MR = 20, MT = 30, MB = 45;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& sr = series[s];
    if (sr.x.size() != sr.y.size() || sr.x.empty())
      throw EmptySeries("emit_plot: series '" + sr.label + "' is empty");
    for (std::size_t i = 0; i < sr.x.size(); ++i) {
      double xv = sr.x[i], yv = sr.y[i];
      if (!std::isfinite(xv) || !std::isfinite(yv))
        throw EmptySeries("emit_plot: non-finite value in series '" +
                          sr.label + "' at index " + std::to_string(i));
      if (style.log_x) {
        if (!(xv > 0)) continue;
        xv = std::log10(xv);
      }
      if (style.log_y) {
        if (!(yv > 0)) continue;
        yv = std::log10(yv);
      }
      xmin = std::min(xmin, xv);
      xmax = std::max(xmax, xv);
      ymin = std::min(ymin, yv);
      ymax = std::max(ymax, yv);
    }
  }
  if (xmin > xmax || ymin > ymax)
    throw EmptySeries("emit_plot: nothing plottable after log filtering");
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  auto px = [&](double v) {
    if (style.log_x) v = std::log10(v);
    return ML + (v - xmin) / (xmax - xmin) * (W - ML - MR);
  };
  auto py = [&](double v) {
    if (style.log_y) v = std::log10(v);
    return H - MB - (v - ymin) / (ymax - ymin) * (H - MT - MB);
  };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b"};
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" "
         "height=\"600\" viewBox=\"0 0 800 600\">\n";
  out << "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n";
  if (!style.title.empty())
    out << "<text x=\"400\" y=\"20\" text-anchor=\"middle\" "
           "font-family=\"monospace\" font-size=\"14\">"
        << style.title << "</text>\n";
  // frame + ticks
  out << "<rect x=\"" << format_double(ML) << "\" y=\"" << format_double(MT)
      << "\" width=\"" << format_double(W - ML - MR) << "\" height=\""
      << format_double(H - MT - MB)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    double fx = xmin + (xmax - xmin) * i / 5.0;
    double fy = ymin + (ymax - ymin) * i / 5.0;
    double gx = ML + (W - ML - MR) * i / 5.0;
    double gy = H - MB - (H - MT - MB) * i / 5.0;
    out << "<text x=\"" << format_double(gx) << "\" y=\""
        << format_double(H - MB + 18)
        << "\" text-anchor=\"middle\" font-family=\"monospace\" "
           "font-size=\"10\">"
        << (style.log_x ? "1e" + format_double(fx) : format_double(fx))
        << "</text>\n";
    out << "<text x=\"" << format_double(ML - 6) << "\" y=\""
        << format_double(gy + 3)
        << "\" text-anchor=\"end\" font-family=\"monospace\" "
           "font-size=\"10\">"
        << (style.log_y ? "1e" + format_double(fy) : format_double(fy))
        << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& sr = series[s];
    out << "<polyline fill=\"none\" stroke=\"" << colors[s % 6]
        << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < sr.x.size(); ++i) {
      if ((style.log_x && !(sr.x[i] > 0)) || (style.log_y && !(sr.y[i] > 0)))
        continue;
      if (!first) out << ' ';
      out << format_double(px(sr.x[i])) << ',' << format_double(py(sr.y[i]));
      first = false;
    }
    out << "\"/>\n";
    out << "<text x=\"" << format_double(W - MR - 8) << "\" y=\""
        << format_double(MT + 16 + 14 * static_cast<double>(s))
        << "\" text-anchor=\"end\" font-family=\"monospace\" "
           "font-size=\"11\" fill=\""
        << colors[s % 6] << "\">" << sr.label << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace momentum
