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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cad/image.hpp"

namespace cad {

enum class DefectKind { kOk = 0, kNotComplete = 1, kStrangeObject = 2, kColorDefect = 3 };

inline constexpr std::array<DefectKind, 4> kAllDefectKinds = {DefectKind::kOk, DefectKind::kNotComplete,
                                                              DefectKind::kStrangeObject, DefectKind::kColorDefect};
inline constexpr std::array<DefectKind, 3> kNokKinds = {DefectKind::kNotComplete, DefectKind::kStrangeObject,
                                                        DefectKind::kColorDefect};

/// Manifest spelling: OK, NOT_COMPLETE, STRANGE_OBJECT, COLOR_DEFECT.
std::string_view to_string(DefectKind kind) noexcept;
std::optional<DefectKind> parse_defect_kind(std::string_view text) noexcept;

enum class Split { kTrain = 0, kVal = 1, kTest = 2 };
std::string_view to_string(Split split) noexcept;
std::optional<Split> parse_split(std::string_view text) noexcept;

/// Geometry and appearance of the procedural ring biscuit. Radii are
/// fractions of half the image side.
struct SynthParams {
  int image_size = 256;
  double ring_outer_radius = 0.80;
  double ring_inner_radius = 0.30;
  double texture_amplitude = 0.06;
  double background_level = 0.03;
  double defect_magnitude = 0.3;
  std::uint64_t seed = 42;

  void validate() const;
};

/// Renders one sample. Deterministic in (kind, seed, params); a defective
/// sample shares every random draw of the same-seed OK render and only
/// differs where its defect is painted.
Image synth_sample(DefectKind kind, std::uint64_t seed, const SynthParams& params);

struct SplitCounts {
  int train_ok = 200;
  int val_ok = 100;
  int test_ok = 40;
  int test_nok = 40;
};

inline constexpr SplitCounts kDeskScaleCounts{200, 100, 40, 40};
inline constexpr SplitCounts kFullScaleCounts{1000, 2000, 200, 200};

/// NOK proportions not complete : strange object : color defect.
using NokRatio = std::array<double, 3>;
inline constexpr NokRatio kDefaultNokRatio{0.4, 0.3, 0.3};

/// Largest-remainder apportionment of total over ratio; ties on the
/// fractional part go to the earlier class. Ratio must be non-negative with a
/// positive sum (it is normalized).
std::array<int, 3> apportion(int total, const NokRatio& ratio);

struct ManifestRecord {
  std::string sample_id;
  std::string path;  // relative to the manifest's directory
  DefectKind label = DefectKind::kOk;
  Split split = Split::kTrain;
  std::uint64_t seed = 0;
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;

  std::vector<const ManifestRecord*> select(Split split) const;
  std::size_t count(Split split, std::optional<DefectKind> label = std::nullopt) const;

  /// Throws kInvalidArgument if ids repeat or a NOK record sits outside test.
  void validate() const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Sample i uses seed derive_seed(master, i). Records are ordered train,
/// val, then a seeded shuffle of the test OK and NOK records. Each sample is
/// augmented by a quarter-turn rotation taken from the low two bits of
/// mix64(sample seed).
DatasetManifest plan_dataset(const SplitCounts& counts, const NokRatio& ratio, std::uint64_t master_seed);

/// Quarter turns applied to a sample with the given seed.
int augmentation_turns(std::uint64_t sample_seed) noexcept;

/// Renders the planned dataset into out_dir/images and writes
/// out_dir/manifest.csv. Returns the manifest.
DatasetManifest synth_dataset(const SynthParams& params, const SplitCounts& counts, const NokRatio& ratio,
                              const std::filesystem::path& out_dir);

/// CSV with header sample_id,path,label,split,seed and LF line endings.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace cad
