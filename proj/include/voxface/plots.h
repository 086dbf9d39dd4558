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

// Standalone SVG charts. Each file embeds its data as CSV in a <metadata>
// block so the numbers survive without a plotting tool.

#ifndef VOXFACE_PLOTS_H_
#define VOXFACE_PLOTS_H_

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voxface/geometry.h"

namespace voxface {

struct BarSeries {
  std::string name;
  std::vector<double> values;
};

struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> labels;
  std::vector<BarSeries> series;  // grouped side by side per label
  // Drawn as a dashed horizontal line when set.
  std::optional<double> reference;
};

std::string RenderBarChart(const BarChart& chart);

// One panel per field: vertices projected on x-y, colored by value on a
// shared scale.
std::string RenderErrorMaps(const Mesh& mesh,
                            const std::vector<std::string>& names,
                            const std::vector<Eigen::VectorXd>& fields,
                            const std::string& title);

}  // namespace voxface

#endif  // VOXFACE_PLOTS_H_
