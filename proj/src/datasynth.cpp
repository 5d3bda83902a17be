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

#include "cad/datasynth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "cad/error.hpp"
#include "cad/rng.hpp"

namespace cad {

std::string_view to_string(DefectKind kind) noexcept {
  switch (kind) {
    case DefectKind::kOk: return "OK";
    case DefectKind::kNotComplete: return "NOT_COMPLETE";
    case DefectKind::kStrangeObject: return "STRANGE_OBJECT";
    case DefectKind::kColorDefect: return "COLOR_DEFECT";
  }
  return "OK";
}

std::optional<DefectKind> parse_defect_kind(std::string_view text) noexcept {
  for (DefectKind kind : kAllDefectKinds) {
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view text) noexcept {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  return std::nullopt;
}

void SynthParams::validate() const {
  require(image_size >= 8, ErrorCode::kInvalidArgument, "image_size must be at least 8");
  require(ring_outer_radius > 0.0 && ring_outer_radius <= 1.0, ErrorCode::kInvalidArgument,
          "ring_outer_radius must be in (0,1]");
  require(ring_inner_radius >= 0.0 && ring_inner_radius < ring_outer_radius, ErrorCode::kInvalidArgument,
          "ring_inner_radius must be in [0, ring_outer_radius)");
  require(texture_amplitude >= 0.0 && texture_amplitude <= 1.0, ErrorCode::kInvalidArgument,
          "texture_amplitude must be in [0,1]");
  require(background_level >= 0.0 && background_level <= 1.0, ErrorCode::kInvalidArgument,
          "background_level must be in [0,1]");
  require(defect_magnitude > 0.0 && defect_magnitude <= 1.0, ErrorCode::kInvalidArgument,
          "defect_magnitude must be in (0,1]");
}

namespace {

constexpr double kPi = std::numbers::pi;

// Stream indices for derive_seed(sample_seed, .).
constexpr std::uint64_t kShapeStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kDefectStream = 3;

double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a < -kPi) a += 2.0 * kPi;
  return a;
}

double smooth_edge(double signed_distance_px) { return std::clamp(signed_distance_px + 0.5, 0.0, 1.0); }

struct RingShape {
  double cx, cy;
  double outer_px, inner_px;
  std::array<double, 3> base;
  std::array<double, 3> phase;
  std::array<double, 3> freq;
  double radial_phase;
};

struct DefectShape {
  // Not complete: removed angular sector.
  double sector_center = 0.0;
  double sector_half_width = 0.0;
  // Strange object / color defect: disc on the ring body.
  double spot_x = 0.0;
  double spot_y = 0.0;
  double spot_radius = 0.0;
  std::array<double, 3> spot_color{};
};

RingShape draw_ring(const SynthParams& p, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kShapeStream));
  const double half = p.image_size / 2.0;
  RingShape s{};
  s.cx = half + rng.uniform(-0.04, 0.04) * half;
  s.cy = half + rng.uniform(-0.04, 0.04) * half;
  const double scale = rng.uniform(0.95, 1.03);
  s.outer_px = p.ring_outer_radius * half * scale;
  s.inner_px = p.ring_inner_radius * half * rng.uniform(0.95, 1.05);
  const double tone = rng.uniform(-0.04, 0.04);
  s.base = {0.80 + tone, 0.60 + tone, 0.34 + 0.5 * tone};
  for (int i = 0; i < 3; ++i) {
    s.phase[i] = rng.uniform(0.0, 2.0 * kPi);
    s.freq[i] = 3.0 + 4.0 * i + std::floor(rng.uniform(0.0, 3.0));
  }
  s.radial_phase = rng.uniform(0.0, 2.0 * kPi);
  return s;
}

DefectShape draw_defect(DefectKind kind, const SynthParams& p, const RingShape& ring, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kDefectStream));
  DefectShape d;
  const double m = p.defect_magnitude;
  const double angle = rng.uniform(-kPi, kPi);
  const double mid = 0.5 * (ring.outer_px + ring.inner_px);
  const double band = ring.outer_px - ring.inner_px;
  switch (kind) {
    case DefectKind::kOk:
      break;
    case DefectKind::kNotComplete:
      d.sector_center = angle;
      d.sector_half_width = kPi * (0.02 + 0.08 * m) * rng.uniform(0.85, 1.15);
      break;
    case DefectKind::kStrangeObject: {
      const double radial = mid + rng.uniform(-0.2, 0.2) * band;
      d.spot_x = ring.cx + radial * std::cos(angle);
      d.spot_y = ring.cy + radial * std::sin(angle);
      d.spot_radius = std::max(1.5, p.image_size * (0.03 + 0.06 * m) * rng.uniform(0.85, 1.15));
      const double shade = rng.uniform(0.05, 0.2);
      d.spot_color = {shade, shade + 0.08, shade};
      break;
    }
    case DefectKind::kColorDefect: {
      d.spot_x = ring.cx + mid * std::cos(angle);
      d.spot_y = ring.cy + mid * std::sin(angle);
      d.spot_radius = std::max(2.0, band * (0.6 + 0.8 * m) * rng.uniform(0.9, 1.1));
      // Per-channel gain at the spot centre: a burnt, reddish-dark shift.
      d.spot_color = {1.0 - 1.2 * m, 1.0 - 2.0 * m, 1.0 - 2.4 * m};
      for (double& g : d.spot_color) g = std::clamp(g, 0.05, 1.0);
      break;
    }
  }
  return d;
}

}  // namespace

Image synth_sample(DefectKind kind, std::uint64_t seed, const SynthParams& params) {
  params.validate();
  const int n = params.image_size;
  const RingShape ring = draw_ring(params, seed);
  const DefectShape defect = draw_defect(kind, params, ring, seed);
  Rng noise(derive_seed(seed, kNoiseStream));

  Image img(n, n, 3);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      // Two noise draws per pixel, always consumed in the same order.
      const double bg_noise = noise.uniform(-0.02, 0.02);
      const double tex_noise = noise.uniform(-1.0, 1.0);

      const double x = c + 0.5 - ring.cx;
      const double y = r + 0.5 - ring.cy;
      const double rho = std::hypot(x, y);
      const double theta = std::atan2(y, x);
      double coverage = smooth_edge(ring.outer_px - rho) * smooth_edge(rho - ring.inner_px);

      if (kind == DefectKind::kNotComplete) {
        const double off = std::abs(wrap_angle(theta - defect.sector_center));
        const double edge_px = (defect.sector_half_width - off) * std::max(rho, 1.0);
        coverage *= 1.0 - smooth_edge(edge_px);
      }

      const double band = ring.outer_px - ring.inner_px;
      const double radial = band > 0 ? (rho - ring.inner_px) / band : 0.0;
      const double shading = 1.0 - 0.35 * (radial - 0.5) * (radial - 0.5);
      double texture = 0.0;
      for (int i = 0; i < 3; ++i) texture += std::sin(ring.freq[i] * theta + ring.phase[i]) / 3.0;
      texture = 0.6 * texture + 0.25 * std::sin(9.0 * radial + ring.radial_phase) + 0.15 * tex_noise;

      std::array<double, 3> body{};
      for (int k = 0; k < 3; ++k) body[k] = ring.base[k] * shading + params.texture_amplitude * texture;

      if (kind == DefectKind::kColorDefect) {
        const double dist = std::hypot(c + 0.5 - defect.spot_x, r + 0.5 - defect.spot_y);
        if (dist < defect.spot_radius) {
          const double t = dist / defect.spot_radius;
          const double w = 1.0 - t * t;
          for (int k = 0; k < 3; ++k) body[k] *= 1.0 - w * (1.0 - defect.spot_color[k]);
        }
      } else if (kind == DefectKind::kStrangeObject) {
        const double dist = std::hypot(c + 0.5 - defect.spot_x, r + 0.5 - defect.spot_y);
        const double w = smooth_edge(defect.spot_radius - dist);
        if (w > 0.0) {
          for (int k = 0; k < 3; ++k) body[k] = (1.0 - w) * body[k] + w * (defect.spot_color[k] + 0.03 * tex_noise);
          coverage = std::max(coverage, w);
        }
      }

      const double background = std::max(0.0, params.background_level + bg_noise);
      for (int k = 0; k < 3; ++k) {
        const double v = (1.0 - coverage) * background + coverage * body[k];
        img.at(r, c, k) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

std::array<int, 3> apportion(int total, const NokRatio& ratio) {
  require(total >= 0, ErrorCode::kInvalidArgument, "apportion total must be non-negative");
  double sum = 0.0;
  for (double r : ratio) {
    require(std::isfinite(r) && r >= 0.0, ErrorCode::kInvalidArgument, "NOK ratio entries must be non-negative");
    sum += r;
  }
  require(sum > 0.0, ErrorCode::kInvalidArgument, "NOK ratio is not normalizable (sum is zero)");
  std::array<int, 3> counts{};
  std::array<double, 3> remainder{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = total * ratio[i] / sum;
    // Guard against 200 * 0.3 = 59.999999... before flooring.
    const double rounded = std::round(exact);
    const double value = std::abs(exact - rounded) < 1e-9 ? rounded : std::floor(exact);
    counts[i] = static_cast<int>(value);
    remainder[i] = exact - value;
    assigned += counts[i];
  }
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (int k = 0; assigned < total; ++k, ++assigned) ++counts[order[k % 3]];
  return counts;
}

int augmentation_turns(std::uint64_t sample_seed) noexcept { return static_cast<int>(mix64(sample_seed) & 3U); }

namespace {

std::string sample_id_for(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06zu", index);
  return buf;
}

}  // namespace

DatasetManifest plan_dataset(const SplitCounts& counts, const NokRatio& ratio, std::uint64_t master_seed) {
  require(counts.train_ok > 0 && counts.val_ok > 0 && counts.test_ok > 0 && counts.test_nok > 0,
          ErrorCode::kInvalidArgument, "split counts must be positive");
  const auto nok = apportion(counts.test_nok, ratio);

  std::vector<std::pair<DefectKind, Split>> plan;
  plan.reserve(static_cast<std::size_t>(counts.train_ok + counts.val_ok + counts.test_ok + counts.test_nok));
  for (int i = 0; i < counts.train_ok; ++i) plan.emplace_back(DefectKind::kOk, Split::kTrain);
  for (int i = 0; i < counts.val_ok; ++i) plan.emplace_back(DefectKind::kOk, Split::kVal);

  std::vector<DefectKind> test_labels(static_cast<std::size_t>(counts.test_ok), DefectKind::kOk);
  for (int k = 0; k < 3; ++k) test_labels.insert(test_labels.end(), static_cast<std::size_t>(nok[k]), kNokKinds[k]);
  Rng order_rng(derive_seed(master_seed, 0x7E57'0DE5ULL));
  shuffle(test_labels, order_rng);
  for (DefectKind kind : test_labels) plan.emplace_back(kind, Split::kTest);

  DatasetManifest manifest;
  manifest.records.reserve(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    ManifestRecord rec;
    rec.sample_id = sample_id_for(i);
    rec.path = "images/" + rec.sample_id + ".ppm";
    rec.label = plan[i].first;
    rec.split = plan[i].second;
    rec.seed = derive_seed(master_seed, i);
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

std::vector<const ManifestRecord*> DatasetManifest::select(Split split) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& rec : records) {
    if (rec.split == split) out.push_back(&rec);
  }
  return out;
}

std::size_t DatasetManifest::count(Split split, std::optional<DefectKind> label) const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](const ManifestRecord& r) {
    return r.split == split && (!label || r.label == *label);
  }));
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& rec : records) {
    require(ids.insert(rec.sample_id).second, ErrorCode::kInvalidArgument, "duplicate sample_id " + rec.sample_id);
    require(rec.split == Split::kTest || rec.label == DefectKind::kOk, ErrorCode::kInvalidArgument,
            "NOK sample " + rec.sample_id + " outside the test split");
  }
}

DatasetManifest synth_dataset(const SynthParams& params, const SplitCounts& counts, const NokRatio& ratio,
                              const std::filesystem::path& out_dir) {
  params.validate();
  DatasetManifest manifest = plan_dataset(counts, ratio, params.seed);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  require(!ec, ErrorCode::kIo, "cannot create dataset directory " + (out_dir / "images").string() + ": " + ec.message());
  for (const auto& rec : manifest.records) {
    Image img = synth_sample(rec.label, rec.seed, params);
    img = rotate90(img, augmentation_turns(rec.seed));
    save_image(img, out_dir / rec.path);
  }
  write_manifest(manifest, out_dir / "manifest.csv");
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write manifest " + path.string());
  out << "sample_id,path,label,split,seed\n";
  for (const auto& rec : manifest.records) {
    out << rec.sample_id << ',' << rec.path << ',' << to_string(rec.label) << ',' << to_string(rec.split) << ','
        << rec.seed << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for manifest " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open manifest " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "sample_id,path,label,split,seed",
          ErrorCode::kBadHeader, "manifest " + path.string() + " lacks the sample_id,path,label,split,seed header");
  DatasetManifest manifest;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    require(fields.size() == 5, ErrorCode::kBadHeader, "expected 5 fields at " + where);
    ManifestRecord rec;
    rec.sample_id = fields[0];
    rec.path = fields[1];
    const auto label = parse_defect_kind(fields[2]);
    require(label.has_value(), ErrorCode::kBadHeader, "unknown label '" + fields[2] + "' at " + where);
    rec.label = *label;
    const auto split = parse_split(fields[3]);
    require(split.has_value(), ErrorCode::kBadHeader, "unknown split '" + fields[3] + "' at " + where);
    rec.split = *split;
    try {
      std::size_t used = 0;
      rec.seed = std::stoull(fields[4], &used);
      require(used == fields[4].size(), ErrorCode::kBadHeader, "bad seed at " + where);
    } catch (const std::logic_error&) {
      fail(ErrorCode::kBadHeader, "bad seed at " + where);
    }
    manifest.records.push_back(std::move(rec));
  }
  manifest.validate();
  return manifest;
}

}  // namespace cad
