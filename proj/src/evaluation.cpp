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

#include "cad/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cad/error.hpp"

namespace cad {

double auc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), ErrorCode::kShapeMismatch, "auc: scores and labels differ in length");
  std::size_t n_pos = 0;
  for (int l : labels) {
    require(l == 0 || l == 1, ErrorCode::kInvalidArgument, "auc: labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(l);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  require(n_pos > 0 && n_neg > 0, ErrorCode::kInvalidArgument, "auc: both classes must be present");
  for (double s : scores) require(!std::isnan(s), ErrorCode::kInvalidArgument, "auc: NaN score");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double average_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) rank_sum += average_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_features_csv(std::span<const FeaturePoint> points, const std::filesystem::path& path) {
  require(!points.empty(), ErrorCode::kInvalidArgument, "write_features_csv: no points");
  const std::size_t k = points.front().values.size();
  require(k >= 1, ErrorCode::kInvalidArgument, "write_features_csv: points have no features");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write features CSV " + path.string());
  out << "sample_id,label";
  for (std::size_t j = 1; j <= k; ++j) out << ",f" << j;
  out << '\n';
  for (const auto& p : points) {
    require(p.values.size() == k, ErrorCode::kShapeMismatch, "write_features_csv: ragged feature rows");
    out << p.sample_id << ',' << to_string(p.label);
    for (double v : p.values) out << ',' << format_double(v);
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<FeaturePoint> read_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open features CSV " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line.rfind("sample_id,label,f1", 0) == 0,
          ErrorCode::kBadHeader, "features CSV " + path.string() + " lacks the sample_id,label,f1,... header");
  const auto k = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',') - 1);
  std::vector<FeaturePoint> points;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    require(fields.size() == k + 2, ErrorCode::kBadHeader, "wrong field count at " + where);
    FeaturePoint p;
    p.sample_id = fields[0];
    const auto label = parse_defect_kind(fields[1]);
    require(label.has_value(), ErrorCode::kBadHeader, "unknown label at " + where);
    p.label = *label;
    for (std::size_t j = 0; j < k; ++j) {
      double v = 0.0;
      const std::string& text = fields[j + 2];
      const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
      require(res.ec == std::errc() && res.ptr == text.data() + text.size(), ErrorCode::kBadHeader,
              "bad number '" + text + "' at " + where);
      p.values.push_back(v);
    }
    points.push_back(std::move(p));
  }
  return points;
}

std::string_view label_color(DefectKind kind) noexcept {
  switch (kind) {
    case DefectKind::kOk: return "#1f77b4";
    case DefectKind::kNotComplete: return "#ff7f0e";
    case DefectKind::kStrangeObject: return "#2ca02c";
    case DefectKind::kColorDefect: return "#d62728";
  }
  return "#000000";
}

namespace {

std::string fixed(double v, int decimals = 2) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct AxisRange {
  double lo;
  double hi;
};

AxisRange padded_range(std::span<const FeaturePoint> points, std::size_t dim) {
  double lo = points.front().values[dim];
  double hi = lo;
  for (const auto& p : points) {
    lo = std::min(lo, p.values[dim]);
    hi = std::max(hi, p.values[dim]);
  }
  double span = hi - lo;
  if (span <= 0.0) span = std::max(std::abs(lo), 1.0);
  return AxisRange{lo - 0.05 * span, hi + 0.05 * span};
}

}  // namespace

void scatter_svg(std::span<const FeaturePoint> points, const std::filesystem::path& path,
                 const ScatterOptions& options) {
  require(!points.empty(), ErrorCode::kInvalidArgument, "scatter_svg: no points");
  for (const auto& p : points) {
    require(p.values.size() >= 2, ErrorCode::kShapeMismatch, "scatter_svg needs two coordinates per point");
  }
  constexpr double kWidth = 640, kHeight = 480;
  constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const AxisRange xr = padded_range(points, 0);
  const AxisRange yr = padded_range(points, 1);
  const auto sx = [&](double v) { return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  const auto sy = [&](double v) { return kTop + plot_h - (v - yr.lo) / (yr.hi - yr.lo) * plot_h; };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"#ffffff\"/>\n";
  if (!options.title.empty()) {
    svg << "<text x=\"" << fixed(kLeft + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"15\">" << escape_xml(options.title) << "</text>\n";
  }
  svg << "<g stroke=\"#333333\" stroke-width=\"1\" fill=\"none\">\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\"" << plot_h << "\"/>\n"
      << "</g>\n";
  svg << "<g font-family=\"sans-serif\" font-size=\"10\" fill=\"#333333\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = xr.lo + (xr.hi - xr.lo) * t / 4.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * t / 4.0;
    svg << "<text x=\"" << fixed(sx(fx)) << "\" y=\"" << fixed(kTop + plot_h + 16)
        << "\" text-anchor=\"middle\">" << format_double(std::round(fx * 1e4) / 1e4) << "</text>\n";
    svg << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(sy(fy) + 3) << "\" text-anchor=\"end\">"
        << format_double(std::round(fy * 1e4) / 1e4) << "</text>\n";
  }
  svg << "<text x=\"" << fixed(kLeft + plot_w / 2) << "\" y=\"" << fixed(kHeight - 18)
      << "\" text-anchor=\"middle\" font-size=\"12\">" << escape_xml(options.x_label) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << fixed(kTop + plot_h / 2) << "\" text-anchor=\"middle\" font-size=\"12\" "
      << "transform=\"rotate(-90 16 " << fixed(kTop + plot_h / 2) << ")\">" << escape_xml(options.y_label)
      << "</text>\n";
  svg << "</g>\n";

  svg << "<g fill-opacity=\"0.75\" stroke=\"none\">\n";
  for (const auto& p : points) {
    svg << "<circle cx=\"" << fixed(sx(p.values[0])) << "\" cy=\"" << fixed(sy(p.values[1])) << "\" r=\"3\" fill=\""
        << label_color(p.label) << "\"><title>" << escape_xml(p.sample_id) << "</title></circle>\n";
  }
  svg << "</g>\n";

  svg << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
  double ly = kTop + 10;
  for (DefectKind kind : kAllDefectKinds) {
    svg << "<rect x=\"" << fixed(kWidth - kRight + 16) << "\" y=\"" << fixed(ly - 8) << "\" width=\"10\" height=\"10\" fill=\""
        << label_color(kind) << "\"/>\n";
    svg << "<text x=\"" << fixed(kWidth - kRight + 32) << "\" y=\"" << fixed(ly + 1) << "\">" << to_string(kind)
        << "</text>\n";
    ly += 18;
  }
  svg << "</g>\n</svg>\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write SVG " + path.string());
  out << svg.str();
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace cad
