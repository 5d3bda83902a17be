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

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>

#include "cad/error.hpp"
#include "cad/evaluation.hpp"
#include "cad/model_io.hpp"
#include "cad/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cad;

namespace {

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

ErrorCode code_of(const std::function<void()>& f, std::string* message = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  return ErrorCode::kInvalidArgument;
}

std::vector<FeaturePoint> sample_points(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FeaturePoint> pts;
  for (int i = 0; i < n; ++i) {
    pts.push_back({"p" + std::to_string(i), kAllDefectKinds[static_cast<std::size_t>(i) % 4],
                   {rng.normal(), rng.normal() * 1e-7, 1.0 / 3.0}});
  }
  return pts;
}

}  // namespace

TEST_CASE("auc on hand-computed cases") {
  const std::vector<double> s = {0.1, 0.2, 0.8, 0.9};
  CHECK(auc(s, std::vector<int>{0, 0, 1, 1}) == 1.0);
  CHECK(auc(s, std::vector<int>{1, 1, 0, 0}) == 0.0);
  CHECK(auc(std::vector<double>{5, 5, 5, 5}, std::vector<int>{0, 1, 0, 1}) == 0.5);
  CHECK(auc(std::vector<double>{1, 2, 3, 4}, std::vector<int>{0, 1, 0, 1}) == 0.75);
  CHECK_THROWS_AS(auc(s, std::vector<int>{1, 1, 1, 1}), Error);
  CHECK_THROWS_AS(auc(s, std::vector<int>{0, 1}), Error);
}

TEST_CASE("auc matches the pairwise definition with ties") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const int n = 5 + static_cast<int>(rng.below(60));
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      scores.push_back(static_cast<double>(rng.below(7)));  // many ties
      labels.push_back(i < 2 ? i : static_cast<int>(rng.below(2)));
    }
    CHECK(std::abs(auc(scores, labels) - oracle::pairwise_auc(scores, labels)) <= 1e-12);
  }
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, 123456789.125, std::numeric_limits<double>::denorm_min()}) {
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("feature CSV layout and round trip") {
  TempDir dir;
  const std::vector<FeaturePoint> one = {{"a", DefectKind::kColorDefect, {0.25, -1.0}}};
  write_features_csv(one, dir.path() / "one.csv");
  const std::string text = file_bytes(dir.path() / "one.csv");
  CHECK(text == "sample_id,label,f1,f2\na,COLOR_DEFECT,0.25,-1\n");
  CHECK(read_features_csv(dir.path() / "one.csv") == one);

  const auto pts = sample_points(25, 3);
  write_features_csv(pts, dir.path() / "many.csv");
  CHECK(read_features_csv(dir.path() / "many.csv") == pts);

  std::vector<FeaturePoint> ragged = pts;
  ragged[3].values.pop_back();
  CHECK_THROWS_AS(write_features_csv(ragged, dir.path() / "bad.csv"), Error);
  write_bytes(dir.path() / "bad.csv", "sample_id,label,f1\na,OK,zz\n");
  CHECK_THROWS_AS(read_features_csv(dir.path() / "bad.csv"), Error);
  write_bytes(dir.path() / "bad.csv", "sample_id,label,f1\na,NOK,1\n");
  CHECK_THROWS_AS(read_features_csv(dir.path() / "bad.csv"), Error);
}

TEST_CASE("scatter SVG has one marker per point and is deterministic") {
  TempDir dir;
  const auto pts = sample_points(37, 8);
  ScatterOptions opt;
  opt.title = "a < b & c";
  scatter_svg(pts, dir.path() / "a.svg", opt);
  scatter_svg(pts, dir.path() / "b.svg", opt);
  const std::string svg = file_bytes(dir.path() / "a.svg");
  CHECK(svg == file_bytes(dir.path() / "b.svg"));
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("<svg ") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(count_of(svg, "<circle") == 37);
  CHECK(svg.find("a &lt; b &amp; c") != std::string::npos);
  for (DefectKind k : kAllDefectKinds) CHECK(svg.find(std::string(label_color(k))) != std::string::npos);
  CHECK(label_color(DefectKind::kOk) == "#1f77b4");
}

TEST_CASE("CAEM round trip is exact") {
  TempDir dir;
  const CaeModel m = init_model(make_preset(Preset::kBae1, 32), 32, 5);
  save_cae(m, dir.path() / "m.caem");
  const CaeModel back = load_cae(dir.path() / "m.caem");
  CHECK(back == m);
  save_cae(back, dir.path() / "m2.caem");
  CHECK(file_bytes(dir.path() / "m.caem") == file_bytes(dir.path() / "m2.caem"));
}

TEST_CASE("CAEM rejects corrupted files with distinct codes") {
  TempDir dir;
  const auto p = dir.path() / "m.caem";
  save_cae(init_model(make_preset(Preset::kBae2, 16), 16, 1), p);
  const std::string good = file_bytes(p);

  std::string bad = good;
  bad[0] = 'X';
  write_bytes(p, bad);
  CHECK(code_of([&] { load_cae(p); }) == ErrorCode::kBadMagic);

  bad = good;
  bad[4] = 9;
  write_bytes(p, bad);
  CHECK(code_of([&] { load_cae(p); }) == ErrorCode::kVersionMismatch);

  write_bytes(p, good.substr(0, good.size() - 10));
  std::string msg;
  CHECK(code_of([&] { load_cae(p); }, &msg) == ErrorCode::kTruncated);
  CHECK(msg.find("weights of conv layer") != std::string::npos);

  write_bytes(p, good + "x");
  CHECK(code_of([&] { load_cae(p); }) == ErrorCode::kUnsupportedFormat);
  CHECK(code_of([&] { load_cae(dir.path() / "missing.caem"); }) == ErrorCode::kIo);
}

TEST_CASE("OCSV round trip preserves decisions bit for bit") {
  TempDir dir;
  Rng rng(4);
  Eigen::MatrixXd x(40, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  OcSvmConfig cfg;
  cfg.nu = 0.2;
  const OcSvmModel m = ocsvm_fit(x, cfg);
  const auto p = dir.path() / "m.ocsv";
  save_ocsvm(m, p);
  const OcSvmModel back = load_ocsvm(p);
  CHECK(back.support_vectors == m.support_vectors);
  CHECK(back.alphas == m.alphas);
  CHECK(back.rho == m.rho);
  CHECK(back.gamma == m.gamma);
  CHECK(back.nu == m.nu);
  CHECK(back.n_train == m.n_train);
  CHECK(decision_rows(back, x) == decision_rows(m, x));

  const std::string good = file_bytes(p);
  write_bytes(p, good.substr(0, 30));
  std::string msg;
  CHECK(code_of([&] { load_ocsvm(p); }, &msg) == ErrorCode::kTruncated);
  CHECK(msg.find("parameters") != std::string::npos);
  write_bytes(p, "CAEM" + good.substr(4));
  CHECK(code_of([&] { load_ocsvm(p); }) == ErrorCode::kBadMagic);
}
