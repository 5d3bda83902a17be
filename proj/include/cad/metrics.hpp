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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cad/cae.hpp"
#include "cad/datasynth.hpp"
#include "cad/image.hpp"

namespace cad {

/// Mean over all pixels and channels of (x - xhat)^2.
double l2_error(const Image& x, const Image& xhat);

struct SsimParams {
  int window_size = 11;
  double gaussian_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  double c1() const noexcept { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const noexcept { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  void validate() const;
};

/// Normalized 1-D Gaussian taps of length window_size.
std::vector<double> gaussian_window(const SsimParams& params);

struct SsimResult {
  double mean = 0.0;
  int height = 0;
  int width = 0;
  std::vector<double> map;  // row-major, channel-averaged, entries in [-1, 1]
};

/// Gaussian-windowed SSIM computed per channel and averaged. Borders use
/// symmetric (edge-including) reflection so the map covers every pixel.
SsimResult ssim(const Image& x, const Image& xhat, const SsimParams& params = {});

struct ErrorFeaturePoint {
  std::string sample_id;
  DefectKind label = DefectKind::kOk;
  double l2 = 0.0;
  double ssim = 0.0;
};

struct LabeledImage {
  std::string sample_id;
  DefectKind label = DefectKind::kOk;
  Image image;
};

/// Maps a batch of images to their reconstructions.
using Reconstructor = std::function<std::vector<Image>(std::span<const Image>)>;

std::vector<ErrorFeaturePoint> build_error_features(const Reconstructor& reconstructor,
                                                    std::span<const LabeledImage> samples,
                                                    const SsimParams& params = {}, int batch_size = 5);

/// Uses reconstruct(model, .) as the reconstructor.
std::vector<ErrorFeaturePoint> build_error_features(const CaeModel& model, std::span<const LabeledImage> samples,
                                                    const SsimParams& params = {}, int batch_size = 5);

/// Image <-> tensor conversion (HWC interleaved <-> CHW).
Tensor4<float> to_tensor(std::span<const Image> images);
Tensor4<float> to_tensor(std::span<const LabeledImage> images);
Image to_image(const Tensor4<float>& tensor, int index);

}  // namespace cad
