#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "densesynth/core/error.hpp"
#include "densesynth/eval/froc.hpp"

namespace densesynth::eval {

struct PlotCurve {
  std::string label;
  std::vector<FrocPoint> points;
};

/// Sensitivity vs FPPI chart as standalone SVG.
inline std::string plot_froc_svg(const std::vector<PlotCurve>& curves, const std::string& title,
                                 double max_fppi = 1.0) {
  constexpr double W = 640, H = 480, L = 70, R = 180, T = 40, B = 60;
  const double pw = W - L - R, ph = H - T - B;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  auto px = [&](double f) { return L + pw * std::clamp(f / max_fppi, 0.0, 1.0); };
  auto py = [&](double s) { return T + ph * (1.0 - std::clamp(s, 0.0, 1.0)); };
  std::ostringstream svg;
  char buf[256];
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">", L + pw / 2);
  svg << buf << title << "</text>\n";
  for (int k = 0; k <= 5; ++k) {
    const double f = max_fppi * k / 5.0, s = k / 5.0;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\">%.2f</text>\n",
                  px(f), T, px(f), T + ph, px(f), T + ph + 16, f);
    svg << buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">%.1f</text>\n",
                  L, py(s), L + pw, py(s), L - 6, py(s) + 4, s);
    svg << buf;
  }
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"black\"/>\n"
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"13\" text-anchor=\"middle\">False positives per image</text>\n"
                "<text x=\"18\" y=\"%.1f\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 %.1f)\">Sensitivity</text>\n",
                L, T, pw, ph, L + pw / 2, H - 16, T + ph / 2, T + ph / 2);
  svg << buf;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    svg << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << color << "\" points=\"";
    double f0 = 0.0, s0 = 0.0;
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(0), py(0));
    svg << buf;
    for (const auto& p : curves[i].points) {
      if (f0 >= max_fppi) break;
      double f = p.fppi, s = p.sensitivity;
      if (f > max_fppi) {
        s = s0 + (s - s0) * (max_fppi - f0) / (f - f0);
        f = max_fppi;
      }
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(f), py(s));
      svg << buf;
      f0 = f;
      s0 = s;
    }
    if (f0 < max_fppi) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f", px(max_fppi), py(s0));
      svg << buf;
    }
    svg << "\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" stroke-width=\"2\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\">",
                  L + pw + 12, T + 14 + 20.0 * i, L + pw + 36, T + 14 + 20.0 * i, color, L + pw + 42,
                  T + 18 + 20.0 * i);
    svg << buf << curves[i].label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

inline void write_curve_csv(const FrocResult& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write curve: " + path.string());
  out << "threshold,fppi,sensitivity\n";
  char buf[128];
  for (const auto& p : r.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.fppi, p.sensitivity);
    out << buf;
  }
}

inline std::vector<FrocPoint> read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open curve: " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<FrocPoint> pts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    FrocPoint p;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &p.threshold, &p.fppi, &p.sensitivity) != 3)
      throw InvalidInput("malformed curve row in " + path.string());
    pts.push_back(p);
  }
  return pts;
}

}  // namespace densesynth::eval
