/*
 * Copyright 2026 RingFed Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ringfed/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace ringfed {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string render_line_chart(const LineChart& chart) {
  const double ml = 62, mr = 16, mt = 34, mb = 48;
  const double pw = chart.width - ml - mr, ph = chart.height - mt - mb;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const PlotSeries& s : chart.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;
  const double ypad = 0.06 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\""
      << chart.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << chart.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << chart.title << "</text>\n";

  // grid and ticks
  for (int i = 0; i <= 5; ++i) {
    const double ty = ymin + (ymax - ymin) * i / 5.0;
    const double yy = py(ty);
    svg << "<line x1=\"" << num(ml) << "\" y1=\"" << num(yy) << "\" x2=\"" << num(ml + pw)
        << "\" y2=\"" << num(yy) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << num(ml - 6) << "\" y=\"" << num(yy + 4)
        << "\" text-anchor=\"end\">" << num(ty) << "</text>\n";
    const double tx = xmin + (xmax - xmin) * i / 5.0;
    const double xx = px(tx);
    svg << "<line x1=\"" << num(xx) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(xx)
        << "\" y2=\"" << num(mt + ph) << "\" stroke=\"#eeeeee\"/>\n";
    svg << "<text x=\"" << num(xx) << "\" y=\"" << num(mt + ph + 16)
        << "\" text-anchor=\"middle\">" << num(tx) << "</text>\n";
  }
  svg << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw)
      << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  svg << "<text x=\"" << chart.width / 2 << "\" y=\"" << chart.height - 10
      << "\" text-anchor=\"middle\">" << chart.x_label << "</text>\n";
  svg << "<text x=\"16\" y=\"" << chart.height / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << chart.height / 2 << ")\">"
      << chart.y_label << "</text>\n";

  for (std::size_t si = 0; si < chart.series.size(); ++si) {
    const PlotSeries& s = chart.series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg << num(px(s.x[i])) << "," << num(py(s.y[i])) << " ";
    svg << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i]))
          << "\" r=\"2.2\" fill=\"" << color << "\"/>\n";
    const double ly = mt + 14 + 15 * static_cast<double>(si);
    svg << "<line x1=\"" << num(ml + pw - 150) << "\" y1=\"" << num(ly) << "\" x2=\""
        << num(ml + pw - 130) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(ml + pw - 125) << "\" y=\"" << num(ly + 4) << "\">" << s.label
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace ringfed
