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

#include <filesystem>
#include <fstream>
#include <string>

#include "cad/datasynth.hpp"
#include "cad/error.hpp"
#include "cad/image.hpp"
#include "cad/rng.hpp"
#include "test_util.hpp"

using namespace cad;

namespace {

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

Image random_image(int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  Image img(h, w, c);
  for (double& v : img.pixels()) v = rng.uniform();
  return img;
}

ErrorCode load_error(const std::filesystem::path& p) {
  try {
    load_image(p);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

}  // namespace

TEST_CASE("load_image decodes P5 bytes") {
  TempDir dir;
  const auto p = dir.path() / "a.pgm";
  write_bytes(p, std::string("P5\n2 2\n255\n") + std::string{'\0', '\xff', '\x7f', '\0'});
  const Image img = load_image(p);
  REQUIRE(img.height() == 2);
  REQUIRE(img.width() == 2);
  REQUIRE(img.channels() == 1);
  CHECK(img.at(0, 0) == 0.0);
  CHECK(img.at(0, 1) == 1.0);
  CHECK(img.at(1, 0) == 127.0 / 255.0);
  CHECK(img.at(1, 1) == 0.0);
}

TEST_CASE("load_image decodes a saturated P6 and accepts header comments") {
  TempDir dir;
  const auto p = dir.path() / "w.ppm";
  write_bytes(p, "P6\n# comment\n2 2\n255\n" + std::string(12, '\xff'));
  const Image img = load_image(p);
  CHECK(img.channels() == 3);
  for (double v : img.pixels()) CHECK(v == 1.0);
}

TEST_CASE("load_image reports distinct failures") {
  TempDir dir;
  const auto trunc = dir.path() / "t.pgm";
  write_bytes(trunc, "P5\n4 4\n255\n" + std::string(5, 'a'));
  CHECK(load_error(trunc) == ErrorCode::kTruncated);

  const auto depth = dir.path() / "d.pgm";
  write_bytes(depth, "P5\n1 1\n65535\n" + std::string(2, 'a'));
  CHECK(load_error(depth) == ErrorCode::kUnsupportedFormat);

  const auto magic = dir.path() / "m.pgm";
  write_bytes(magic, "P2\n1 1\n255\n0\n");
  CHECK(load_error(magic) == ErrorCode::kUnsupportedFormat);

  const auto header = dir.path() / "h.pgm";
  write_bytes(header, "P5\nxx 1\n255\n");
  CHECK(load_error(header) == ErrorCode::kBadHeader);

  CHECK(load_error(dir.path() / "missing.pgm") == ErrorCode::kIo);
}

TEST_CASE("save_image quantizes with round-half-up") {
  TempDir dir;
  const auto p = dir.path() / "z.pgm";
  save_image(Image(1, 1, 1, 0.0), p);
  std::ifstream in(p, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(bytes == std::string("P5\n1 1\n255\n") + '\0');

  CHECK(quantize(0.5) == 128);
  CHECK(quantize(0.0) == 0);
  CHECK(quantize(1.0) == 255);
  CHECK(quantize(127.5 / 255.0) == 128);
}

TEST_CASE("save/load round trip is exact after quantization") {
  TempDir dir;
  for (int c : {1, 3}) {
    const Image raw = random_image(7, 5, c, 11 + static_cast<std::uint64_t>(c));
    const auto p = dir.path() / ("r" + std::to_string(c) + ".pnm");
    save_image(raw, p);
    const Image once = load_image(p);
    CHECK(once == quantized(raw));
    save_image(once, p);
    CHECK(load_image(p) == once);
  }
}

TEST_CASE("to_grayscale uses fixed luma weights") {
  Image white(1, 1, 3, 1.0);
  CHECK(to_grayscale(white).at(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  Image red(1, 1, 3, 0.0);
  red.at(0, 0, 0) = 1.0;
  CHECK(to_grayscale(red).at(0, 0) == 0.299);
  const Image gray = random_image(3, 4, 1, 5);
  CHECK(to_grayscale(gray) == gray);
}

TEST_CASE("rotate90 permutes indices counter-clockwise") {
  // [[a,b],[c,d]] -> [[b,d],[a,c]]
  Image img(2, 2, 1, std::vector<double>{0.1, 0.2, 0.3, 0.4});
  const Image r = rotate90(img, 1);
  CHECK(r.at(0, 0) == 0.2);
  CHECK(r.at(0, 1) == 0.4);
  CHECK(r.at(1, 0) == 0.1);
  CHECK(r.at(1, 1) == 0.3);
  CHECK(rotate90(img, 0) == img);
}

TEST_CASE("rotate90 swaps dimensions and four turns are the identity") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const int h = 1 + static_cast<int>(rng.below(9));
    const int w = 1 + static_cast<int>(rng.below(9));
    const int c = rng.below(2) == 0 ? 1 : 3;
    const Image img = random_image(h, w, c, seed + 100);
    const Image one = rotate90(img, 1);
    CHECK(one.height() == w);
    CHECK(one.width() == h);
    for (int r = 0; r < one.height(); ++r) {
      for (int col = 0; col < one.width(); ++col) CHECK(one.at(r, col) == img.at(col, w - 1 - r));
    }
    CHECK(rotate90(rotate90(rotate90(one, 1), 1), 1) == img);
    CHECK(rotate90(img, 2) == rotate90(one, 1));
    CHECK(rotate90(img, 3) == rotate90(rotate90(one, 1), 1));
  }
  CHECK_THROWS_AS(rotate90(Image(2, 2, 1), 4), Error);
}

TEST_CASE("bounding_box_crop keeps the foreground rectangle") {
  Image img(5, 5, 1, 0.0);
  img.at(2, 3) = 0.8;
  const Image cropped = bounding_box_crop(img, 0.1);
  REQUIRE(cropped.height() == 1);
  REQUIRE(cropped.width() == 1);
  CHECK(cropped.at(0, 0) == 0.8);

  const Image blank(6, 4, 3, 0.05);
  CHECK(bounding_box_crop(blank, 0.1) == blank);
}

TEST_CASE("bounding_box_crop on a synthetic biscuit matches an exhaustive scan") {
  SynthParams params;
  params.image_size = 64;
  const Image img = synth_sample(DefectKind::kOk, 7, params);
  const Image gray = to_grayscale(img);
  int top = img.height(), left = img.width(), bottom = -1, right = -1;
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      if (gray.at(r, c) > 0.1) {
        top = std::min(top, r);
        bottom = std::max(bottom, r);
        left = std::min(left, c);
        right = std::max(right, c);
      }
    }
  }
  REQUIRE(bottom >= 0);
  const CropBox box = foreground_bounds(img, 0.1);
  CHECK(box == CropBox{top, left, bottom - top + 1, right - left + 1});
  const Image cropped = bounding_box_crop(img, 0.1);
  CHECK(cropped.height() <= img.height());
  CHECK(cropped.width() <= img.width());
  CHECK(bounding_box_crop(cropped, 0.1) == cropped);
}

TEST_CASE("resize_bilinear matches the half-pixel formula") {
  const Image img(1, 2, 1, std::vector<double>{0.0, 1.0});
  const Image out = resize_bilinear(img, 1, 4);
  // source x = (i + 0.5) * 2 / 4 - 0.5 = -0.25, 0.25, 0.75, 1.25 -> clamped
  CHECK(out.at(0, 0) == 0.0);
  CHECK(out.at(0, 1) == 0.25);
  CHECK(out.at(0, 2) == 0.75);
  CHECK(out.at(0, 3) == 1.0);
}

TEST_CASE("resize_bilinear preserves constants and identity") {
  const Image flat(5, 7, 3, 0.37);
  const Image big = resize_bilinear(flat, 11, 3);
  CHECK(big.height() == 11);
  CHECK(big.width() == 3);
  for (double v : big.pixels()) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
  const Image rnd = random_image(6, 9, 3, 3);
  CHECK(resize_bilinear(rnd, 6, 9) == rnd);
  for (double v : resize_bilinear(rnd, 13, 4).pixels()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("Image validates its invariants") {
  CHECK_THROWS_AS(Image(2, 2, 1, std::vector<double>{0.0, 0.1, 1.5, 0.2}).validate(), Error);
  CHECK_THROWS_AS(Image(2, 2, 2), Error);
  CHECK_NOTHROW(Image(2, 2, 3, 0.5).validate());
}
