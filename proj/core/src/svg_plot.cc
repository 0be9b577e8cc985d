// Copyright 2026 The hrtfdiff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hrtfdiff/svg_plot.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "hrtfdiff/common.h"

namespace hrtfdiff {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                               "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string Escape(const std::string& s) {
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

struct Axes {
  double x0, x1, y0, y1;
  bool log_x;

  double X(double x) const {
    const double u = log_x ? (std::log10(x) - std::log10(x0)) / (std::log10(x1) - std::log10(x0))
                           : (x - x0) / (x1 - x0);
    return kLeft + u * (kWidth - kLeft - kRight);
  }
  double Y(double y) const {
    return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
  }
};

void Expand(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

void Frame(std::ostringstream& svg, const Axes& ax, const PlotLabels& labels) {
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << Escape(labels.title) << "</text>\n";
  const double left = kLeft, right = kWidth - kRight;
  const double top = kTop, bottom = kHeight - kBottom;
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << right - left
      << "\" height=\"" << bottom - top << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = ax.y0 + (ax.y1 - ax.y0) * i / 5.0;
    svg << "<line x1=\"" << left << "\" x2=\"" << right << "\" y1=\"" << ax.Y(y) << "\" y2=\""
        << ax.Y(y) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << ax.Y(y) + 4 << "\" text-anchor=\"end\">"
        << Fmt(y) << "</text>\n";
  }
  svg << "<text x=\"" << (left + right) / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\">" << Escape(labels.x_label) << "</text>\n";
  svg << "<text x=\"18\" y=\"" << (top + bottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (top + bottom) / 2 << ")\">" << Escape(labels.y_label) << "</text>\n";
}

}  // namespace

std::string LinePlotSvg(const std::vector<Series>& series, const PlotLabels& labels, bool log_x) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (log_x && s.x[i] <= 0.0) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) {
    x0 = log_x ? 1.0 : 0.0;
    x1 = log_x ? 10.0 : 1.0;
    y0 = 0.0;
    y1 = 1.0;
  }
  if (!(x1 > x0)) x1 = log_x ? x0 * 10.0 : x0 + 1.0;
  Expand(y0, y1);
  const Axes ax{x0, x1, y0, y1, log_x};
  std::ostringstream svg;
  Frame(svg, ax, labels);
  for (int i = 0; i <= 4; ++i) {
    const double x = log_x ? std::pow(10.0, std::log10(x0) + (std::log10(x1) - std::log10(x0)) * i / 4.0)
                           : x0 + (x1 - x0) * i / 4.0;
    svg << "<text x=\"" << ax.X(x) << "\" y=\"" << kHeight - kBottom + 16
        << "\" text-anchor=\"middle\">" << Fmt(x) << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % 8];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (log_x && s.x[i] <= 0.0) continue;
      svg << Fmt(ax.X(s.x[i])) << ',' << Fmt(ax.Y(s.y[i])) << ' ';
    }
    svg << "\"/>\n";
    const double ly = kTop + 14 + 18 * k;
    svg << "<line x1=\"" << kWidth - kRight + 12 << "\" x2=\"" << kWidth - kRight + 32 << "\" y1=\""
        << ly - 4 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kWidth - kRight + 38 << "\" y=\"" << ly << "\">" << Escape(s.name)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string BoxPlotSvg(const std::vector<Group>& groups, const PlotLabels& labels) {
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  for (const auto& g : groups) {
    for (double v : g.values) {
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  }
  if (!std::isfinite(y0)) {
    y0 = 0.0;
    y1 = 1.0;
  }
  Expand(y0, y1);
  const double n = std::max<std::size_t>(groups.size(), 1);
  const Axes ax{0.0, n, y0, y1, false};
  std::ostringstream svg;
  Frame(svg, ax, labels);
  auto quantile = [](const std::vector<double>& v, double q) {
    const double pos = q * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - lo) * (v[hi] - v[lo]);
  };
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const double cx = ax.X(k + 0.5);
    const double half = 0.25 * (ax.X(1.0) - ax.X(0.0));
    svg << "<text x=\"" << cx << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">"
        << Escape(groups[k].name) << "</text>\n";
    if (groups[k].values.empty()) continue;
    std::vector<double> v = groups[k].values;
    std::sort(v.begin(), v.end());
    const double q1 = quantile(v, 0.25), q2 = quantile(v, 0.5), q3 = quantile(v, 0.75);
    const char* color = kColors[k % 8];
    svg << "<line x1=\"" << cx << "\" x2=\"" << cx << "\" y1=\"" << ax.Y(v.front()) << "\" y2=\""
        << ax.Y(v.back()) << "\" stroke=\"black\"/>\n";
    svg << "<rect x=\"" << cx - half << "\" y=\"" << ax.Y(q3) << "\" width=\"" << 2 * half
        << "\" height=\"" << std::max(ax.Y(q1) - ax.Y(q3), 1.0) << "\" fill=\"" << color
        << "\" fill-opacity=\"0.5\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << cx - half << "\" x2=\"" << cx + half << "\" y1=\"" << ax.Y(q2)
        << "\" y2=\"" << ax.Y(q2) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void WriteTextFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + path);
  out << text;
}

}  // namespace hrtfdiff
