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

#include "cad/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cad/error.hpp"

namespace cad {

double l2_error(const Image& x, const Image& xhat) {
  require(x.same_shape(xhat), ErrorCode::kShapeMismatch, "l2_error: image dimensions differ");
  require(!x.empty(), ErrorCode::kShapeMismatch, "l2_error: empty images");
  double sum = 0.0;
  const auto a = x.pixels();
  const auto b = xhat.pixels();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

void SsimParams::validate() const {
  require(window_size >= 3 && window_size % 2 == 1, ErrorCode::kInvalidArgument,
          "SSIM window_size must be odd and >= 3");
  require(gaussian_sigma > 0.0, ErrorCode::kInvalidArgument, "SSIM gaussian_sigma must be positive");
  require(c1() > 0.0 && c2() > 0.0, ErrorCode::kInvalidArgument, "SSIM constants must be positive");
}

std::vector<double> gaussian_window(const SsimParams& params) {
  params.validate();
  const int radius = params.window_size / 2;
  std::vector<double> taps(static_cast<std::size_t>(params.window_size));
  double sum = 0.0;
  for (int i = 0; i < params.window_size; ++i) {
    const double d = i - radius;
    taps[i] = std::exp(-(d * d) / (2.0 * params.gaussian_sigma * params.gaussian_sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

namespace {

int reflect(int i, int n) {
  if (i < 0) return -i - 1;
  if (i >= n) return 2 * n - i - 1;
  return i;
}

// Separable Gaussian blur of one plane with symmetric borders.
std::vector<double> blur(const std::vector<double>& plane, int h, int w, const std::vector<double>& taps) {
  const int radius = static_cast<int>(taps.size()) / 2;
  std::vector<double> tmp(plane.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * plane[static_cast<std::size_t>(r) * w + reflect(c + k, w)];
      tmp[static_cast<std::size_t>(r) * w + c] = acc;
    }
  }
  std::vector<double> out(plane.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * tmp[static_cast<std::size_t>(reflect(r + k, h)) * w + c];
      out[static_cast<std::size_t>(r) * w + c] = acc;
    }
  }
  return out;
}

}  // namespace

SsimResult ssim(const Image& x, const Image& xhat, const SsimParams& params) {
  require(x.same_shape(xhat), ErrorCode::kShapeMismatch, "ssim: image dimensions differ");
  const auto taps = gaussian_window(params);
  require(x.height() >= params.window_size && x.width() >= params.window_size, ErrorCode::kShapeMismatch,
          "ssim: image smaller than the " + std::to_string(params.window_size) + "-pixel window");
  const int h = x.height();
  const int w = x.width();
  const int channels = x.channels();
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const double c1 = params.c1();
  const double c2 = params.c2();

  SsimResult result;
  result.height = h;
  result.width = w;
  result.map.assign(n, 0.0);
  std::vector<double> a(n), b(n), aa(n), bb(n), ab(n);
  for (int ch = 0; ch < channels; ++ch) {
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = x.pixels()[i * channels + ch];
      b[i] = xhat.pixels()[i * channels + ch];
      aa[i] = a[i] * a[i];
      bb[i] = b[i] * b[i];
      ab[i] = a[i] * b[i];
    }
    const auto mu_a = blur(a, h, w, taps);
    const auto mu_b = blur(b, h, w, taps);
    const auto e_aa = blur(aa, h, w, taps);
    const auto e_bb = blur(bb, h, w, taps);
    const auto e_ab = blur(ab, h, w, taps);
    for (std::size_t i = 0; i < n; ++i) {
      const double mu_ab = mu_a[i] * mu_b[i];
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_ab;
      const double num = (2.0 * mu_ab + c1) * (2.0 * cov + c2);
      const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2);
      result.map[i] += std::clamp(num / den, -1.0, 1.0);
    }
  }
  double total = 0.0;
  for (double& v : result.map) {
    v /= channels;
    total += v;
  }
  result.mean = total / static_cast<double>(n);
  return result;
}

Tensor4<float> to_tensor(std::span<const Image> images) {
  require(!images.empty(), ErrorCode::kInvalidArgument, "no images to convert");
  const Image& first = images.front();
  Tensor4<float> t(Shape4{static_cast<int>(images.size()), first.channels(), first.height(), first.width()});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = images[n];
    require(img.same_shape(first), ErrorCode::kShapeMismatch, "images in a batch must share dimensions");
    for (int c = 0; c < img.channels(); ++c) {
      for (int r = 0; r < img.height(); ++r) {
        for (int col = 0; col < img.width(); ++col) t(static_cast<int>(n), c, r, col) = static_cast<float>(img.at(r, col, c));
      }
    }
  }
  return t;
}

Tensor4<float> to_tensor(std::span<const LabeledImage> images) {
  std::vector<Image> plain;
  plain.reserve(images.size());
  for (const auto& li : images) plain.push_back(li.image);
  return to_tensor(plain);
}

Image to_image(const Tensor4<float>& tensor, int index) {
  const Shape4 s = tensor.shape();
  require(index >= 0 && index < s.n, ErrorCode::kInvalidArgument, "tensor sample index out of range");
  Image img(s.h, s.w, s.c);
  for (int c = 0; c < s.c; ++c) {
    for (int r = 0; r < s.h; ++r) {
      for (int col = 0; col < s.w; ++col) img.at(r, col, c) = std::clamp(static_cast<double>(tensor(index, c, r, col)), 0.0, 1.0);
    }
  }
  return img;
}

std::vector<ErrorFeaturePoint> build_error_features(const Reconstructor& reconstructor,
                                                    std::span<const LabeledImage> samples, const SsimParams& params,
                                                    int batch_size) {
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  std::vector<ErrorFeaturePoint> points;
  points.reserve(samples.size());
  std::vector<Image> batch;
  for (std::size_t begin = 0; begin < samples.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(samples.size(), begin + static_cast<std::size_t>(batch_size));
    batch.clear();
    for (std::size_t i = begin; i < end; ++i) batch.push_back(samples[i].image);
    const std::vector<Image> recon = reconstructor(batch);
    require(recon.size() == batch.size(), ErrorCode::kShapeMismatch, "reconstructor returned a different batch size");
    for (std::size_t i = begin; i < end; ++i) {
      const Image& x = samples[i].image;
      const Image& xhat = recon[i - begin];
      points.push_back(ErrorFeaturePoint{samples[i].sample_id, samples[i].label, l2_error(x, xhat),
                                         ssim(x, xhat, params).mean});
    }
  }
  return points;
}

std::vector<ErrorFeaturePoint> build_error_features(const CaeModel& model, std::span<const LabeledImage> samples,
                                                    const SsimParams& params, int batch_size) {
  for (const auto& s : samples) {
    require(s.image.height() == model.input_size && s.image.width() == model.input_size &&
                s.image.channels() == model.arch.input_channels(),
            ErrorCode::kShapeMismatch, "sample " + s.sample_id + " does not match the model input size");
  }
  const Reconstructor recon = [&model](std::span<const Image> batch) {
    const Tensor4<float> out = reconstruct(model, to_tensor(batch));
    std::vector<Image> images;
    images.reserve(batch.size());
    for (int i = 0; i < out.shape().n; ++i) images.push_back(to_image(out, i));
    return images;
  };
  return build_error_features(recon, samples, params, batch_size);
}

}  // namespace cad
