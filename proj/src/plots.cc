// Copyright 2026 The voxface Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "voxface/plots.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "voxface/common.h"

namespace voxface {

namespace {

constexpr const char* kPalette[] = {"#4878a8", "#e08a3c", "#5aa05a", "#c0504d",
                                    "#8064a2", "#4bacc6"};

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

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string Short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// Blue to red through white.
std::string Color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  double r, g, b;
  if (t < 0.5) {
    double s = t / 0.5;
    r = 0.23 + s * 0.77; g = 0.30 + s * 0.70; b = 0.75 + s * 0.25;
  } else {
    double s = (t - 0.5) / 0.5;
    r = 1.0 - s * 0.29; g = 1.0 - s * 0.98; b = 1.0 - s * 0.85;
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(r * 255),
                static_cast<int>(g * 255), static_cast<int>(b * 255));
  return buf;
}

void Metadata(std::ostringstream& out, const std::string& csv) {
  out << "<metadata><![CDATA[\n" << csv << "]]></metadata>\n";
}

}  // namespace

std::string RenderBarChart(const BarChart& chart) {
  const int n = static_cast<int>(chart.labels.size());
  const int ns = std::max<int>(1, static_cast<int>(chart.series.size()));
  for (const BarSeries& s : chart.series) {
    if (static_cast<int>(s.values.size()) != n) {
      throw Error("bar chart: series " + s.name + " has " +
                  std::to_string(s.values.size()) + " values for " +
                  std::to_string(n) + " labels");
    }
  }
  double lo = 0.0, hi = 0.0;
  for (const BarSeries& s : chart.series) {
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (chart.reference) {
    lo = std::min(lo, *chart.reference);
    hi = std::max(hi, *chart.reference);
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  hi += pad;
  if (lo < 0.0) lo -= pad;

  const double left = 70, right = 20, top = 40, bottom = 120;
  const double group = 14.0 * ns + 10.0;
  const double width = left + right + std::max(1, n) * group;
  const double height = 420;
  const double plot_h = height - top - bottom;
  auto y = [&](double v) { return top + (hi - v) / (hi - lo) * plot_h; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Num(width)
      << "\" height=\"" << Num(height) << "\" font-family=\"sans-serif\" "
      << "font-size=\"11\">\n";
  std::ostringstream csv;
  csv << "label";
  for (const BarSeries& s : chart.series) csv << "," << s.name;
  csv << "\n";
  for (int i = 0; i < n; ++i) {
    csv << chart.labels[static_cast<size_t>(i)];
    for (const BarSeries& s : chart.series) {
      csv << "," << FormatDouble(s.values[static_cast<size_t>(i)]);
    }
    csv << "\n";
  }
  Metadata(out, csv.str());
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << Num(width / 2) << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-size=\"14\">" << Escape(chart.title) << "</text>\n";
  out << "<text transform=\"translate(16," << Num(top + plot_h / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << Escape(chart.y_label)
      << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    double v = lo + (hi - lo) * t / 4.0;
    out << "<line x1=\"" << Num(left - 4) << "\" x2=\"" << Num(width - right)
        << "\" y1=\"" << Num(y(v)) << "\" y2=\"" << Num(y(v))
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << Num(left - 6) << "\" y=\"" << Num(y(v) + 4)
        << "\" text-anchor=\"end\">" << Short(v) << "</text>\n";
  }
  for (int i = 0; i < n; ++i) {
    double x0 = left + i * group + 5.0;
    for (int s = 0; s < static_cast<int>(chart.series.size()); ++s) {
      double v = chart.series[static_cast<size_t>(s)].values[static_cast<size_t>(i)];
      if (!std::isfinite(v)) continue;
      double y0 = y(std::max(v, 0.0)), y1 = y(std::min(v, 0.0));
      out << "<rect x=\"" << Num(x0 + 14.0 * s) << "\" y=\"" << Num(y0)
          << "\" width=\"12\" height=\"" << Num(std::max(y1 - y0, 0.5))
          << "\" fill=\"" << kPalette[s % 6] << "\"/>\n";
    }
    double cx = x0 + 7.0 * ns;
    out << "<text transform=\"translate(" << Num(cx) << ","
        << Num(top + plot_h + 8) << ") rotate(60)\">"
        << Escape(chart.labels[static_cast<size_t>(i)]) << "</text>\n";
  }
  out << "<line x1=\"" << Num(left) << "\" x2=\"" << Num(width - right)
      << "\" y1=\"" << Num(y(0)) << "\" y2=\"" << Num(y(0))
      << "\" stroke=\"black\"/>\n";
  if (chart.reference) {
    out << "<line x1=\"" << Num(left) << "\" x2=\"" << Num(width - right)
        << "\" y1=\"" << Num(y(*chart.reference)) << "\" y2=\""
        << Num(y(*chart.reference))
        << "\" stroke=\"black\" stroke-dasharray=\"4,3\"/>\n";
  }
  if (chart.series.size() > 1) {
    for (size_t s = 0; s < chart.series.size(); ++s) {
      double ly = top + 14.0 * static_cast<double>(s);
      out << "<rect x=\"" << Num(width - right - 110) << "\" y=\""
          << Num(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
          << kPalette[s % 6] << "\"/>\n";
      out << "<text x=\"" << Num(width - right - 95) << "\" y=\"" << Num(ly)
          << "\">" << Escape(chart.series[s].name) << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::string RenderErrorMaps(const Mesh& mesh,
                            const std::vector<std::string>& names,
                            const std::vector<Eigen::VectorXd>& fields,
                            const std::string& title) {
  if (names.size() != fields.size()) {
    throw Error("error maps: names and fields differ in count");
  }
  const int t = mesh.num_vertices();
  double vmax = 0.0;
  for (const Eigen::VectorXd& f : fields) {
    if (f.size() != t) throw Error("error maps: field length != vertex count");
    if (t > 0) vmax = std::max(vmax, f.maxCoeff());
  }
  if (vmax <= 0.0) vmax = 1.0;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (t > 0) {
    xmin = mesh.vertices.col(0).minCoeff();
    xmax = mesh.vertices.col(0).maxCoeff();
    ymin = mesh.vertices.col(1).minCoeff();
    ymax = mesh.vertices.col(1).maxCoeff();
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-9});
  const double panel = 240, margin = 20, top = 50;
  const double width = margin + fields.size() * (panel + margin);
  const double height = top + panel + 60;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Num(width)
      << "\" height=\"" << Num(height) << "\" font-family=\"sans-serif\" "
      << "font-size=\"11\">\n";
  std::ostringstream csv;
  csv << "vertex";
  for (const std::string& n : names) csv << "," << n;
  csv << "\n";
  for (int i = 0; i < t; ++i) {
    csv << i;
    for (const Eigen::VectorXd& f : fields) csv << "," << FormatDouble(f[i]);
    csv << "\n";
  }
  Metadata(out, csv.str());
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << Num(width / 2) << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-size=\"14\">" << Escape(title) << "</text>\n";
  for (size_t p = 0; p < fields.size(); ++p) {
    double ox = margin + p * (panel + margin);
    double mean = t > 0 ? fields[p].mean() : 0.0;
    out << "<text x=\"" << Num(ox + panel / 2) << "\" y=\"" << Num(top - 8)
        << "\" text-anchor=\"middle\">" << Escape(names[p]) << " (mean "
        << Short(mean) << " mm)</text>\n";
    for (int i = 0; i < t; ++i) {
      double px = ox + (mesh.vertices(i, 0) - xmin) / span * panel;
      double py = top + panel - (mesh.vertices(i, 1) - ymin) / span * panel;
      out << "<circle cx=\"" << Num(px) << "\" cy=\"" << Num(py)
          << "\" r=\"3\" fill=\"" << Color(fields[p][i] / vmax) << "\"/>\n";
    }
  }
  double ly = top + panel + 25;
  for (int s = 0; s < 20; ++s) {
    out << "<rect x=\"" << Num(margin + s * 10.0) << "\" y=\"" << Num(ly)
        << "\" width=\"10\" height=\"10\" fill=\"" << Color(s / 19.0)
        << "\"/>\n";
  }
  out << "<text x=\"" << Num(margin + 210) << "\" y=\"" << Num(ly + 9)
      << "\">0 to " << Short(vmax) << " mm</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace voxface
