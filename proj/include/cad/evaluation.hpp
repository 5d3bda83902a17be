/*
 *  Copyright 2026 The cookie-ad Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cad/datasynth.hpp"

namespace cad {

/// One row of a feature-space CSV (sample_id,label,f1,...,fk).
struct FeaturePoint {
  std::string sample_id;
  DefectKind label = DefectKind::kOk;
  std::vector<double> values;

  friend bool operator==(const FeaturePoint&, const FeaturePoint&) = default;
};

/// Probability that a random positive outscores a random negative, ties
/// counted one half (Mann-Whitney U / (n_pos n_neg)), via average ranks.
/// Throws kInvalidArgument unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// Header sample_id,label,f1,...,fk. All points must share k.
void write_features_csv(std::span<const FeaturePoint> points, const std::filesystem::path& path);
std::vector<FeaturePoint> read_features_csv(const std::filesystem::path& path);

struct ScatterOptions {
  std::string title;
  std::string x_label = "f1";
  std::string y_label = "f2";
};

/// Self-contained SVG: one <circle> per point coloured by label, axes scaled
/// to the data range plus 5% margins, legend drawn with <rect> swatches.
///   OK #1f77b4, NOT_COMPLETE #ff7f0e, STRANGE_OBJECT #2ca02c, COLOR_DEFECT #d62728
void scatter_svg(std::span<const FeaturePoint> points, const std::filesystem::path& path,
                 const ScatterOptions& options = {});

std::string_view label_color(DefectKind kind) noexcept;

}  // namespace cad
