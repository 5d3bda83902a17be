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

#include "cad/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "cad/error.hpp"

namespace cad {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  require(height >= 1 && width >= 1, ErrorCode::kInvalidArgument, "image dimensions must be positive");
  require(channels == 1 || channels == 3, ErrorCode::kInvalidArgument, "image channels must be 1 or 3");
  pixels_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<double> pixels)
    : height_(height), width_(width), channels_(channels), pixels_(std::move(pixels)) {
  require(height >= 1 && width >= 1, ErrorCode::kInvalidArgument, "image dimensions must be positive");
  require(channels == 1 || channels == 3, ErrorCode::kInvalidArgument, "image channels must be 1 or 3");
  require(pixels_.size() == static_cast<std::size_t>(height) * width * channels, ErrorCode::kShapeMismatch,
          "pixel buffer length does not match height x width x channels");
}

void Image::validate() const {
  require(height_ >= 1 && width_ >= 1, ErrorCode::kInvalidArgument, "image dimensions must be positive");
  require(channels_ == 1 || channels_ == 3, ErrorCode::kInvalidArgument, "image channels must be 1 or 3");
  require(pixels_.size() == static_cast<std::size_t>(height_) * width_ * channels_, ErrorCode::kShapeMismatch,
          "pixel buffer length does not match height x width x channels");
  for (double v : pixels_) {
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorCode::kInvalidArgument,
            "pixel intensity outside [0,1]");
  }
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
bool next_token(std::istream& in, std::string& token) {
  token.clear();
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c) && c != '#') {
    token.push_back(static_cast<char>(c));
    c = in.get();
  }
  // The single whitespace byte after maxval has been consumed here, which is
  // exactly what the format requires before the raster.
  return !token.empty();
}

int parse_positive(const std::string& token, const std::string& field) {
  require(!token.empty() && std::all_of(token.begin(), token.end(), [](char ch) { return std::isdigit(ch); }),
          ErrorCode::kBadHeader, "malformed " + field + " in image header: '" + token + "'");
  require(token.size() <= 9, ErrorCode::kBadHeader, field + " out of range in image header");
  const int value = std::stoi(token);
  require(value >= 1, ErrorCode::kBadHeader, field + " must be positive in image header");
  return value;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open image file " + path.string());

  std::string token;
  require(next_token(in, token), ErrorCode::kBadHeader, "missing magic number in " + path.string());
  int channels = 0;
  if (token == "P5") {
    channels = 1;
  } else if (token == "P6") {
    channels = 3;
  } else {
    fail(ErrorCode::kUnsupportedFormat, "unsupported image magic '" + token + "' in " + path.string());
  }
  require(next_token(in, token), ErrorCode::kBadHeader, "missing width in " + path.string());
  const int width = parse_positive(token, "width");
  require(next_token(in, token), ErrorCode::kBadHeader, "missing height in " + path.string());
  const int height = parse_positive(token, "height");
  require(next_token(in, token), ErrorCode::kBadHeader, "missing maxval in " + path.string());
  const int maxval = parse_positive(token, "maxval");
  require(maxval == 255, ErrorCode::kUnsupportedFormat,
          "unsupported maxval " + std::to_string(maxval) + " in " + path.string() + " (only 255)");

  const std::size_t count = static_cast<std::size_t>(height) * width * channels;
  std::vector<unsigned char> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  require(static_cast<std::size_t>(in.gcount()) == count, ErrorCode::kTruncated,
          "truncated pixel payload in " + path.string() + ": expected " + std::to_string(count) + " bytes, got " +
              std::to_string(in.gcount()));

  std::vector<double> pixels(count);
  std::transform(raw.begin(), raw.end(), pixels.begin(), [](unsigned char b) { return b / 255.0; });
  return Image(height, width, channels, std::move(pixels));
}

unsigned char quantize(double intensity) noexcept {
  const double clamped = std::clamp(intensity, 0.0, 1.0);
  return static_cast<unsigned char>(std::floor(clamped * 255.0 + 0.5));
}

Image quantized(const Image& img) {
  Image out = img;
  for (double& v : out.pixels()) v = quantize(v) / 255.0;
  return out;
}

void save_image(const Image& img, const std::filesystem::path& path) {
  img.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << (img.channels() == 1 ? "P5" : "P6") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> raw(img.size());
  std::transform(img.pixels().begin(), img.pixels().end(), raw.begin(), quantize);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  out.flush();
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

Image to_grayscale(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.height(), img.width(), 1);
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      const double luma = 0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2);
      out.at(r, c) = std::clamp(luma, 0.0, 1.0);
    }
  }
  return out;
}

Image rotate90(const Image& img, int quarter_turns) {
  require(quarter_turns >= 0 && quarter_turns <= 3, ErrorCode::kInvalidArgument,
          "quarter_turns must be in 0..3");
  if (quarter_turns == 0) return img;
  const int h = img.height();
  const int w = img.width();
  const int ch = img.channels();
  const bool odd = quarter_turns % 2 == 1;
  Image out(odd ? w : h, odd ? h : w, ch);
  for (int r = 0; r < out.height(); ++r) {
    for (int c = 0; c < out.width(); ++c) {
      int sr = 0;
      int sc = 0;
      switch (quarter_turns) {
        case 1: sr = c; sc = w - 1 - r; break;
        case 2: sr = h - 1 - r; sc = w - 1 - c; break;
        default: sr = h - 1 - c; sc = r; break;
      }
      for (int k = 0; k < ch; ++k) out.at(r, c, k) = img.at(sr, sc, k);
    }
  }
  return out;
}

CropBox foreground_bounds(const Image& img, double threshold) {
  require(threshold >= 0.0 && threshold < 1.0, ErrorCode::kInvalidArgument, "crop threshold must be in [0,1)");
  const Image gray = to_grayscale(img);
  int top = gray.height();
  int bottom = -1;
  int left = gray.width();
  int right = -1;
  for (int r = 0; r < gray.height(); ++r) {
    for (int c = 0; c < gray.width(); ++c) {
      if (gray.at(r, c) > threshold) {
        top = std::min(top, r);
        bottom = std::max(bottom, r);
        left = std::min(left, c);
        right = std::max(right, c);
      }
    }
  }
  if (bottom < 0) return CropBox{0, 0, img.height(), img.width()};
  return CropBox{top, left, bottom - top + 1, right - left + 1};
}

Image crop(const Image& img, const CropBox& box) {
  require(box.top >= 0 && box.left >= 0 && box.height >= 1 && box.width >= 1 &&
              box.top + box.height <= img.height() && box.left + box.width <= img.width(),
          ErrorCode::kInvalidArgument, "crop box outside image");
  Image out(box.height, box.width, img.channels());
  for (int r = 0; r < box.height; ++r) {
    for (int c = 0; c < box.width; ++c) {
      for (int k = 0; k < img.channels(); ++k) out.at(r, c, k) = img.at(box.top + r, box.left + c, k);
    }
  }
  return out;
}

Image bounding_box_crop(const Image& img, double threshold) {
  const CropBox box = foreground_bounds(img, threshold);
  if (box.top == 0 && box.left == 0 && box.height == img.height() && box.width == img.width()) return img;
  return crop(img, box);
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;  // weight of hi
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in - 1);
    taps[i] = Tap{lo, hi, src - lo};
  }
  return taps;
}

}  // namespace

Image resize_bilinear(const Image& img, int new_height, int new_width) {
  require(new_height >= 1 && new_width >= 1, ErrorCode::kInvalidArgument, "resize target must be positive");
  if (new_height == img.height() && new_width == img.width()) return img;
  const auto rows = bilinear_taps(img.height(), new_height);
  const auto cols = bilinear_taps(img.width(), new_width);
  Image out(new_height, new_width, img.channels());
  for (int r = 0; r < new_height; ++r) {
    const Tap& tr = rows[r];
    for (int c = 0; c < new_width; ++c) {
      const Tap& tc = cols[c];
      for (int k = 0; k < img.channels(); ++k) {
        const double top = img.at(tr.lo, tc.lo, k) * (1.0 - tc.frac) + img.at(tr.lo, tc.hi, k) * tc.frac;
        const double bottom = img.at(tr.hi, tc.lo, k) * (1.0 - tc.frac) + img.at(tr.hi, tc.hi, k) * tc.frac;
        out.at(r, c, k) = std::clamp(top * (1.0 - tr.frac) + bottom * tr.frac, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace cad
