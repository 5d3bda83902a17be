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

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace cad {

/// Row-major, channel-interleaved raster of intensities in [0, 1].
/// channels is 1 (grayscale) or 3 (RGB).
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);
  Image(int height, int width, int channels, std::vector<double> pixels);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  double& at(int row, int col, int ch = 0) noexcept {
    return pixels_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + ch];
  }
  double at(int row, int col, int ch = 0) const noexcept {
    return pixels_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + ch];
  }

  std::span<double> pixels() noexcept { return pixels_; }
  std::span<const double> pixels() const noexcept { return pixels_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  /// Throws kInvalidArgument when any invariant (dims, channel count,
  /// finite intensities in [0,1]) is violated.
  void validate() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> pixels_;
};

/// Reads binary 8-bit PGM (P5) or PPM (P6). Header comments (#) are accepted.
/// Errors: kIo (open), kBadHeader, kUnsupportedFormat (maxval != 255 or other
/// magic), kTruncated.
Image load_image(const std::filesystem::path& path);

/// Writes P5 for grayscale, P6 for RGB; byte = floor(v * 255 + 0.5).
void save_image(const Image& img, const std::filesystem::path& path);

/// The 8-bit value save_image writes for an intensity.
unsigned char quantize(double intensity) noexcept;

/// Image after a save/load round trip.
Image quantized(const Image& img);

/// Luma 0.299 R + 0.587 G + 0.114 B. Grayscale input is returned unchanged.
Image to_grayscale(const Image& img);

/// Counter-clockwise rotation by quarter_turns * 90 degrees (quarter_turns in 0..3).
/// For one turn, out(r, c) = in(c, W - 1 - r).
Image rotate90(const Image& img, int quarter_turns);

struct CropBox {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
  friend bool operator==(const CropBox&, const CropBox&) = default;
};

inline constexpr double kDefaultCropThreshold = 0.1;

/// Minimal rectangle containing every pixel whose luma exceeds threshold;
/// the full frame when no pixel does.
CropBox foreground_bounds(const Image& img, double threshold = kDefaultCropThreshold);

Image crop(const Image& img, const CropBox& box);

/// crop(img, foreground_bounds(img, threshold)).
Image bounding_box_crop(const Image& img, double threshold = kDefaultCropThreshold);

/// Bilinear resampling with half-pixel centres: the source coordinate of
/// output index i is (i + 0.5) * in / out - 0.5, clamped to the valid range.
/// Same-size requests return the input unchanged.
Image resize_bilinear(const Image& img, int new_height, int new_width);

}  // namespace cad
