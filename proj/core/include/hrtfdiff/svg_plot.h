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

#ifndef HRTFDIFF_SVG_PLOT_H_
#define HRTFDIFF_SVG_PLOT_H_

#include <string>
#include <vector>

namespace hrtfdiff {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Group {
  std::string name;
  std::vector<double> values;
};

struct PlotLabels {
  std::string title;
  std::string x_label;
  std::string y_label;
};

std::string LinePlotSvg(const std::vector<Series>& series, const PlotLabels& labels,
                        bool log_x = false);
std::string BoxPlotSvg(const std::vector<Group>& groups, const PlotLabels& labels);

void WriteTextFile(const std::string& path, const std::string& text);

}  // namespace hrtfdiff

#endif  // HRTFDIFF_SVG_PLOT_H_
