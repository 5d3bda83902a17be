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

#include "cad/cae.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "cad/rng.hpp"

namespace cad {

std::string_view to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kMaxPool2: return "maxpool2";
    case LayerKind::kUpsample2: return "upsample2";
  }
  return "conv";
}

std::string_view to_string(Preset preset) noexcept {
  switch (preset) {
    case Preset::kBae1: return "BAE1";
    case Preset::kBae2: return "BAE2";
    case Preset::kMvtec: return "MVTEC";
  }
  return "BAE1";
}

std::optional<Preset> parse_preset(std::string_view text) noexcept {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "bae1") return Preset::kBae1;
  if (lower == "bae2") return Preset::kBae2;
  if (lower == "mvtec") return Preset::kMvtec;
  return std::nullopt;
}

namespace {

std::vector<LayerSpec> all_layers(const Architecture& arch) {
  std::vector<LayerSpec> layers = arch.encoder;
  layers.insert(layers.end(), arch.decoder.begin(), arch.decoder.end());
  return layers;
}

int conv_out(int size, const LayerSpec& l) { return (size + 2 * l.padding - l.kernel_size) / l.stride + 1; }

Shape4 layer_output(const LayerSpec& l, Shape4 s) {
  switch (l.kind) {
    case LayerKind::kConv:
      return Shape4{s.n, l.out_channels, conv_out(s.h, l), conv_out(s.w, l)};
    case LayerKind::kRelu:
    case LayerKind::kSigmoid:
      return s;
    case LayerKind::kMaxPool2:
      return Shape4{s.n, s.c, s.h / 2, s.w / 2};
    case LayerKind::kUpsample2:
      return Shape4{s.n, s.c, s.h * 2, s.w * 2};
  }
  return s;
}

int ceil_log2(int v) {
  int p = 0;
  while ((1 << p) < v) ++p;
  return p;
}

int scaled(int channels, int divisor) { return std::max(1, channels / divisor); }

}  // namespace

int Architecture::conv_count() const noexcept {
  int count = 0;
  for (const auto* stack : {&encoder, &decoder}) {
    for (const auto& l : *stack) count += l.kind == LayerKind::kConv ? 1 : 0;
  }
  return count;
}

int Architecture::input_channels() const {
  for (const auto& l : all_layers(*this)) {
    if (l.kind == LayerKind::kConv) return l.in_channels;
  }
  fail(ErrorCode::kInvalidArgument, "architecture '" + name + "' has no convolution");
}

void Architecture::validate() const {
  require(conv_count() >= 1, ErrorCode::kInvalidArgument, "architecture '" + name + "' has no convolution");
  int channels = -1;
  for (const auto& l : all_layers(*this)) {
    if (l.kind != LayerKind::kConv) continue;
    require(l.kernel_size >= 1 && l.kernel_size % 2 == 1, ErrorCode::kInvalidArgument,
            "conv kernel_size must be odd in '" + name + "'");
    require(l.stride == 1 || l.stride == 2, ErrorCode::kInvalidArgument, "conv stride must be 1 or 2");
    require(l.padding == l.kernel_size / 2, ErrorCode::kInvalidArgument, "conv padding must be kernel_size/2");
    require(l.in_channels >= 1 && l.out_channels >= 1, ErrorCode::kInvalidArgument, "conv channels must be positive");
    require(channels < 0 || channels == l.in_channels, ErrorCode::kInvalidArgument,
            "conv input channels do not match the previous conv output in '" + name + "'");
    channels = l.out_channels;
  }
}

Shape4 Architecture::output_shape(Shape4 input, bool code_only) const {
  Shape4 s = input;
  for (const auto& l : encoder) s = layer_output(l, s);
  if (code_only) return s;
  for (const auto& l : decoder) s = layer_output(l, s);
  return s;
}

Architecture make_preset(Preset preset, int input_size, int width_divisor) {
  require(width_divisor >= 1, ErrorCode::kInvalidArgument, "width_divisor must be >= 1");
  require(input_size >= 1 && std::has_single_bit(static_cast<unsigned>(input_size)), ErrorCode::kInvalidArgument,
          "preset input size must be a power of two");
  Architecture a;
  a.name = std::string(to_string(preset));
  const auto ch = [&](int c) { return scaled(c, width_divisor); };
  switch (preset) {
    case Preset::kBae1: {
      require(input_size >= 8, ErrorCode::kInvalidArgument, "BAE1 needs an input of at least 8 pixels");
      const int e1 = ch(16), e2 = ch(8), e3 = ch(8);
      a.encoder = {LayerSpec::conv(3, e1, 3), LayerSpec::relu(), LayerSpec::maxpool2(),
                   LayerSpec::conv(e1, e2, 3), LayerSpec::relu(), LayerSpec::maxpool2(),
                   LayerSpec::conv(e2, e3, 3), LayerSpec::relu(), LayerSpec::maxpool2()};
      a.decoder = {LayerSpec::upsample2(), LayerSpec::conv(e3, e2, 3), LayerSpec::relu(),
                   LayerSpec::upsample2(), LayerSpec::conv(e2, e1, 3), LayerSpec::relu(),
                   LayerSpec::upsample2(), LayerSpec::conv(e1, 3, 3),  LayerSpec::sigmoid()};
      break;
    }
    case Preset::kBae2: {
      require(input_size >= 4, ErrorCode::kInvalidArgument, "BAE2 needs an input of at least 4 pixels");
      const int e1 = ch(16), e2 = ch(8);
      a.encoder = {LayerSpec::conv(3, e1, 3), LayerSpec::relu(), LayerSpec::maxpool2(),
                   LayerSpec::conv(e1, e2, 3), LayerSpec::relu(), LayerSpec::maxpool2()};
      a.decoder = {LayerSpec::upsample2(), LayerSpec::conv(e2, e1, 3), LayerSpec::relu(),
                   LayerSpec::upsample2(), LayerSpec::conv(e1, 3, 3),  LayerSpec::sigmoid()};
      break;
    }
    case Preset::kMvtec: {
      const int strided = std::min(8, ceil_log2(input_size));
      const int plan[8] = {32, 32, 32, 64, 64, 128, 64, 128};
      const int kernels[8] = {5, 5, 5, 5, 3, 3, 3, 3};
      int in = 3;
      for (int i = 0; i < 8; ++i) {
        const int out = ch(plan[i]);
        a.encoder.push_back(LayerSpec::conv(in, out, kernels[i], i < strided ? 2 : 1));
        if (i < 7) a.encoder.push_back(LayerSpec::relu());
        in = out;
      }
      for (int j = 0; j < 8; ++j) {
        const int mirrored = 7 - j;
        const int out = mirrored == 0 ? 3 : ch(plan[mirrored - 1]);
        if (mirrored < strided) a.decoder.push_back(LayerSpec::upsample2());
        a.decoder.push_back(LayerSpec::conv(in, out, kernels[mirrored]));
        a.decoder.push_back(j < 7 ? LayerSpec::relu() : LayerSpec::sigmoid());
        in = out;
      }
      break;
    }
  }
  a.validate();
  return a;
}

std::size_t CaeModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

double init_stddev(const Architecture& arch, std::size_t conv_index) {
  const auto layers = all_layers(arch);
  std::size_t seen = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind != LayerKind::kConv) continue;
    if (seen++ != conv_index) continue;
    const double fan_in = static_cast<double>(layers[i].in_channels) * layers[i].kernel_size * layers[i].kernel_size;
    const bool feeds_relu = i + 1 < layers.size() && layers[i + 1].kind == LayerKind::kRelu;
    return std::sqrt((feeds_relu ? 2.0 : 1.0) / fan_in);
  }
  fail(ErrorCode::kInvalidArgument, "conv index out of range");
}

CaeModel init_model(const Architecture& arch, int input_size, std::uint64_t seed) {
  arch.validate();
  require(input_size >= 1, ErrorCode::kInvalidArgument, "input size must be positive");
  CaeModel model;
  model.arch = arch;
  model.input_size = input_size;
  Rng rng(seed);
  std::size_t conv_index = 0;
  for (const auto& l : all_layers(arch)) {
    if (l.kind != LayerKind::kConv) continue;
    const double stddev = init_stddev(arch, conv_index++);
    ConvParams<float> p;
    p.kernel.resize(static_cast<std::size_t>(l.out_channels) * l.in_channels * l.kernel_size * l.kernel_size);
    for (float& w : p.kernel) w = static_cast<float>(rng.normal(0.0, stddev));
    p.bias.assign(static_cast<std::size_t>(l.out_channels), 0.0f);
    model.params.push_back(std::move(p));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Engine

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

// Unrolls one sample (C x H x W) into rows (c, ky, kx) and columns (oy, ox).
template <typename T>
void im2col(const T* x, int c, int h, int w, const LayerSpec& l, int oh, int ow, T* col) {
  const int k = l.kernel_size;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * l.stride - l.padding + ky;
          T* dst = row + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(ci) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * l.stride - l.padding + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int c, int h, int w, const LayerSpec& l, int oh, int ow, T* dx) {
  const int k = l.kernel_size;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * l.stride - l.padding + ky;
          if (iy < 0 || iy >= h) continue;
          T* dst = dx + (static_cast<std::size_t>(ci) * h + iy) * w;
          const T* src = row + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * l.stride - l.padding + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor4<T> conv_forward(const LayerSpec& l, const ConvParams<T>& p, const Tensor4<T>& x, std::vector<T>& col) {
  const Shape4 s = x.shape();
  require(s.c == l.in_channels, ErrorCode::kShapeMismatch,
          "conv expects " + std::to_string(l.in_channels) + " input channels, got " + std::to_string(s.c));
  const Shape4 os = layer_output(l, s);
  require(os.h >= 1 && os.w >= 1, ErrorCode::kShapeMismatch, "conv input too small: " + s.str());
  Tensor4<T> y(os);
  const int rows = l.in_channels * l.kernel_size * l.kernel_size;
  const int cols = os.h * os.w;
  col.resize(static_cast<std::size_t>(rows) * cols);
  CMapRM<T> weights(p.kernel.data(), l.out_channels, rows);
  for (int n = 0; n < s.n; ++n) {
    im2col(x.sample(n), s.c, s.h, s.w, l, os.h, os.w, col.data());
    MapRM<T> out(y.sample(n), l.out_channels, cols);
    out.noalias() = weights * CMapRM<T>(col.data(), rows, cols);
    for (int o = 0; o < l.out_channels; ++o) out.row(o).array() += p.bias[o];
  }
  return y;
}

template <typename T>
Tensor4<T> conv_backward(const LayerSpec& l, const ConvParams<T>& p, const Tensor4<T>& x, const Tensor4<T>& dy,
                         ConvParams<T>& grad, std::vector<T>& col, std::vector<T>& dcol) {
  const Shape4 s = x.shape();
  const Shape4 os = dy.shape();
  const int rows = l.in_channels * l.kernel_size * l.kernel_size;
  const int cols = os.h * os.w;
  col.resize(static_cast<std::size_t>(rows) * cols);
  dcol.resize(col.size());
  Tensor4<T> dx(s);
  CMapRM<T> weights(p.kernel.data(), l.out_channels, rows);
  MapRM<T> dw(grad.kernel.data(), l.out_channels, rows);
  for (int n = 0; n < s.n; ++n) {
    im2col(x.sample(n), s.c, s.h, s.w, l, os.h, os.w, col.data());
    CMapRM<T> g(dy.sample(n), l.out_channels, cols);
    dw.noalias() += g * CMapRM<T>(col.data(), rows, cols).transpose();
    for (int o = 0; o < l.out_channels; ++o) grad.bias[o] += g.row(o).sum();
    MapRM<T>(dcol.data(), rows, cols).noalias() = weights.transpose() * g;
    col2im(dcol.data(), s.c, s.h, s.w, l, os.h, os.w, dx.sample(n));
  }
  return dx;
}

template <typename T>
Tensor4<T> maxpool_forward(const Tensor4<T>& x, std::vector<std::uint32_t>& argmax) {
  const Shape4 s = x.shape();
  require(s.h % 2 == 0 && s.w % 2 == 0, ErrorCode::kShapeMismatch, "maxpool2 needs even spatial size, got " + s.str());
  const Shape4 os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor4<T> y(os);
  argmax.resize(os.count());
  std::size_t out = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int oy = 0; oy < os.h; ++oy) {
        for (int ox = 0; ox < os.w; ++ox, ++out) {
          // Row-major scan; strict '>' keeps the first maximum.
          std::uint32_t best = 0;
          T best_v = x(n, c, 2 * oy, 2 * ox);
          for (std::uint32_t k = 1; k < 4; ++k) {
            const T v = x(n, c, 2 * oy + static_cast<int>(k / 2), 2 * ox + static_cast<int>(k % 2));
            if (v > best_v) {
              best_v = v;
              best = k;
            }
          }
          y.vec()[out] = best_v;
          argmax[out] = best;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<T> maxpool_backward(const Shape4& in_shape, const Tensor4<T>& dy, const std::vector<std::uint32_t>& argmax) {
  Tensor4<T> dx(in_shape);
  const Shape4 os = dy.shape();
  std::size_t out = 0;
  for (int n = 0; n < os.n; ++n) {
    for (int c = 0; c < os.c; ++c) {
      for (int oy = 0; oy < os.h; ++oy) {
        for (int ox = 0; ox < os.w; ++ox, ++out) {
          const std::uint32_t k = argmax[out];
          dx(n, c, 2 * oy + static_cast<int>(k / 2), 2 * ox + static_cast<int>(k % 2)) += dy.vec()[out];
        }
      }
    }
  }
  return dx;
}

template <typename T>
Tensor4<T> upsample_forward(const Tensor4<T>& x) {
  const Shape4 s = x.shape();
  Tensor4<T> y(Shape4{s.n, s.c, s.h * 2, s.w * 2});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int yy = 0; yy < s.h * 2; ++yy) {
        for (int xx = 0; xx < s.w * 2; ++xx) y(n, c, yy, xx) = x(n, c, yy / 2, xx / 2);
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<T> upsample_backward(const Shape4& in_shape, const Tensor4<T>& dy) {
  Tensor4<T> dx(in_shape);
  const Shape4 os = dy.shape();
  for (int n = 0; n < os.n; ++n) {
    for (int c = 0; c < os.c; ++c) {
      for (int yy = 0; yy < os.h; ++yy) {
        for (int xx = 0; xx < os.w; ++xx) dx(n, c, yy / 2, xx / 2) += dy(n, c, yy, xx);
      }
    }
  }
  return dx;
}

template <typename T>
T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

template <typename T>
struct Trace {
  std::vector<Tensor4<T>> activations;  // activations[i] is the input of layer i; back() is the output
  std::vector<std::vector<std::uint32_t>> argmax;
};

template <typename T>
void check_params(const std::vector<LayerSpec>& layers, const std::vector<ConvParams<T>>& params) {
  std::size_t conv = 0;
  for (const auto& l : layers) {
    if (l.kind != LayerKind::kConv) continue;
    require(conv < params.size(), ErrorCode::kShapeMismatch, "missing parameters for conv layer");
    const auto& p = params[conv++];
    require(p.kernel.size() == static_cast<std::size_t>(l.out_channels) * l.in_channels * l.kernel_size * l.kernel_size &&
                p.bias.size() == static_cast<std::size_t>(l.out_channels),
            ErrorCode::kShapeMismatch, "conv parameter shape does not match the architecture");
  }
  require(conv == params.size(), ErrorCode::kShapeMismatch, "more parameter blocks than conv layers");
}

template <typename T>
Trace<T> run_forward(const std::vector<LayerSpec>& layers, const std::vector<ConvParams<T>>& params,
                     const Tensor4<T>& input) {
  Trace<T> trace;
  trace.activations.reserve(layers.size() + 1);
  trace.activations.push_back(input);
  trace.argmax.resize(layers.size());
  std::vector<T> col;
  std::size_t conv = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const Tensor4<T>& x = trace.activations.back();
    Tensor4<T> y;
    switch (l.kind) {
      case LayerKind::kConv:
        y = conv_forward(l, params[conv++], x, col);
        break;
      case LayerKind::kRelu:
        y = x;
        for (T& v : y.vec()) v = v > T(0) ? v : T(0);
        break;
      case LayerKind::kSigmoid:
        y = x;
        for (T& v : y.vec()) v = sigmoid(v);
        break;
      case LayerKind::kMaxPool2:
        y = maxpool_forward(x, trace.argmax[i]);
        break;
      case LayerKind::kUpsample2:
        y = upsample_forward(x);
        break;
    }
    trace.activations.push_back(std::move(y));
  }
  return trace;
}

}  // namespace

template <typename T>
ForwardOutput<T> forward_with(const Architecture& arch, const std::vector<ConvParams<T>>& params,
                              const Tensor4<T>& input) {
  const auto layers = all_layers(arch);
  check_params(layers, params);
  require(input.shape().c == arch.input_channels(), ErrorCode::kShapeMismatch,
          "input has " + std::to_string(input.shape().c) + " channels, model expects " +
              std::to_string(arch.input_channels()));
  Trace<T> trace = run_forward(layers, params, input);
  ForwardOutput<T> out;
  out.code = std::move(trace.activations[arch.encoder.size()]);
  out.reconstruction = std::move(trace.activations.back());
  return out;
}

template <typename T>
double loss_mse(const Tensor4<T>& reconstruction, const Tensor4<T>& target) {
  require(reconstruction.shape() == target.shape(), ErrorCode::kShapeMismatch,
          "loss_mse shape mismatch: " + reconstruction.shape().str() + " vs " + target.shape().str());
  require(reconstruction.size() > 0, ErrorCode::kShapeMismatch, "loss_mse on empty tensors");
  double sum = 0.0;
  const T* a = reconstruction.data();
  const T* b = target.data();
  for (std::size_t i = 0; i < reconstruction.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(reconstruction.size());
}

template <typename T>
double loss_and_gradients(const Architecture& arch, const std::vector<ConvParams<T>>& params,
                          const Tensor4<T>& input, const Tensor4<T>& target, std::vector<ConvParams<T>>* grads) {
  const auto layers = all_layers(arch);
  check_params(layers, params);
  Trace<T> trace = run_forward(layers, params, input);
  const Tensor4<T>& out = trace.activations.back();
  const double loss = loss_mse(out, target);
  if (grads == nullptr) return loss;

  grads->assign(params.size(), ConvParams<T>{});
  for (std::size_t i = 0; i < params.size(); ++i) {
    (*grads)[i].kernel.assign(params[i].kernel.size(), T(0));
    (*grads)[i].bias.assign(params[i].bias.size(), T(0));
  }

  Tensor4<T> delta(out.shape());
  const T scale = T(2) / static_cast<T>(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) delta.vec()[i] = scale * (out.vec()[i] - target.vec()[i]);

  std::vector<T> col;
  std::vector<T> dcol;
  std::size_t conv = params.size();
  for (std::size_t i = layers.size(); i-- > 0;) {
    const LayerSpec& l = layers[i];
    const Tensor4<T>& x = trace.activations[i];
    const Tensor4<T>& y = trace.activations[i + 1];
    switch (l.kind) {
      case LayerKind::kConv: {
        --conv;
        delta = conv_backward(l, params[conv], x, delta, (*grads)[conv], col, dcol);
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t k = 0; k < delta.size(); ++k) {
          if (!(x.vec()[k] > T(0))) delta.vec()[k] = T(0);
        }
        break;
      case LayerKind::kSigmoid:
        for (std::size_t k = 0; k < delta.size(); ++k) {
          const T s = y.vec()[k];
          delta.vec()[k] *= s * (T(1) - s);
        }
        break;
      case LayerKind::kMaxPool2:
        delta = maxpool_backward(x.shape(), delta, trace.argmax[i]);
        break;
      case LayerKind::kUpsample2:
        delta = upsample_backward(x.shape(), delta);
        break;
    }
  }
  return loss;
}

template ForwardOutput<float> forward_with(const Architecture&, const std::vector<ConvParams<float>>&,
                                           const Tensor4<float>&);
template ForwardOutput<double> forward_with(const Architecture&, const std::vector<ConvParams<double>>&,
                                            const Tensor4<double>&);
template double loss_mse(const Tensor4<float>&, const Tensor4<float>&);
template double loss_mse(const Tensor4<double>&, const Tensor4<double>&);
template double loss_and_gradients(const Architecture&, const std::vector<ConvParams<float>>&, const Tensor4<float>&,
                                   const Tensor4<float>&, std::vector<ConvParams<float>>*);
template double loss_and_gradients(const Architecture&, const std::vector<ConvParams<double>>&,
                                   const Tensor4<double>&, const Tensor4<double>&, std::vector<ConvParams<double>>*);

namespace {

void check_model_input(const CaeModel& model, const Tensor4<float>& batch) {
  const Shape4 expected = model.input_shape(batch.shape().n);
  require(batch.shape() == expected, ErrorCode::kShapeMismatch,
          "batch shape " + batch.shape().str() + " does not match model input " + expected.str());
}

}  // namespace

ForwardOutput<float> forward(const CaeModel& model, const Tensor4<float>& batch) {
  check_model_input(model, batch);
  return forward_with(model.arch, model.params, batch);
}

Tensor4<float> encode(const CaeModel& model, const Tensor4<float>& batch) { return forward(model, batch).code; }

Tensor4<float> reconstruct(const CaeModel& model, const Tensor4<float>& batch) {
  return forward(model, batch).reconstruction;
}

Tensor4<float> corrupt_batch(const Tensor4<float>& batch, double fraction, std::uint64_t seed) {
  require(fraction >= 0.0 && fraction < 1.0, ErrorCode::kInvalidArgument, "corruption fraction must be in [0,1)");
  Tensor4<float> out = batch;
  const std::size_t per = batch.shape().per_sample();
  const auto zeroed = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(per)));
  if (zeroed == 0) return out;
  std::vector<std::size_t> index(per);
  for (int n = 0; n < batch.shape().n; ++n) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(n)));
    std::iota(index.begin(), index.end(), std::size_t{0});
    float* s = out.sample(n);
    for (std::size_t k = 0; k < zeroed; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.below(per - k));
      std::swap(index[k], index[j]);
      s[index[k]] = 0.0f;
    }
  }
  return out;
}

AdamOptimizer::AdamOptimizer(const std::vector<ConvParams<float>>& shape_like, AdamConfig config)
    : config_(config) {
  m_.resize(shape_like.size());
  for (std::size_t i = 0; i < shape_like.size(); ++i) {
    m_[i].kernel.assign(shape_like[i].kernel.size(), 0.0f);
    m_[i].bias.assign(shape_like[i].bias.size(), 0.0f);
  }
  v_ = m_;
}

void AdamOptimizer::step(std::vector<ConvParams<float>>& params, const std::vector<ConvParams<float>>& grads) {
  require(params.size() == m_.size() && grads.size() == m_.size(), ErrorCode::kShapeMismatch,
          "Adam parameter layout mismatch");
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const auto update = [&](std::vector<float>& p, const std::vector<float>& g, std::vector<float>& m,
                          std::vector<float>& v) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = static_cast<float>(b1 * m[k] + (1.0 - b1) * g[k]);
      v[k] = static_cast<float>(b2 * v[k] + (1.0 - b2) * static_cast<double>(g[k]) * g[k]);
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] = static_cast<float>(p[k] - config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon));
    }
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    update(params[i].kernel, grads[i].kernel, m_[i].kernel, v_[i].kernel);
    update(params[i].bias, grads[i].bias, m_[i].bias, v_[i].bias);
  }
}

void TrainConfig::validate() const {
  require(epochs >= 1, ErrorCode::kInvalidArgument, "epochs must be >= 1");
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  require(adam.learning_rate > 0.0, ErrorCode::kInvalidArgument, "learning_rate must be positive");
  require(corruption_fraction >= 0.0 && corruption_fraction < 1.0, ErrorCode::kInvalidArgument,
          "corruption_fraction must be in [0,1)");
}

namespace {

Tensor4<float> gather(const Tensor4<float>& set, const std::vector<std::size_t>& order, std::size_t begin,
                      std::size_t end) {
  Shape4 s = set.shape();
  s.n = static_cast<int>(end - begin);
  Tensor4<float> batch(s);
  const std::size_t per = s.per_sample();
  for (std::size_t i = begin; i < end; ++i) {
    std::copy_n(set.sample(static_cast<int>(order[i])), per, batch.sample(static_cast<int>(i - begin)));
  }
  return batch;
}

double evaluate_loss(const CaeModel& model, const Tensor4<float>& set, int batch_size) {
  const auto n = static_cast<std::size_t>(set.shape().n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  double weighted = 0.0;
  for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(n, b + static_cast<std::size_t>(batch_size));
    const Tensor4<float> batch = gather(set, order, b, e);
    weighted += loss_mse(reconstruct(model, batch), batch) * static_cast<double>(e - b);
  }
  return weighted / static_cast<double>(n);
}

}  // namespace

TrainResult train(CaeModel model, const Tensor4<float>& train_set, const Tensor4<float>& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  require(train_set.shape().n >= 1, ErrorCode::kInvalidArgument, "training set is empty");
  check_model_input(model, train_set);
  if (val_set.shape().n > 0) check_model_input(model, val_set);

  AdamOptimizer adam(model.params, config.adam);
  TrainResult result{model, {}};
  double best = std::numeric_limits<double>::infinity();
  const auto n = static_cast<std::size_t>(train_set.shape().n);
  std::vector<std::size_t> order(n);
  std::vector<ConvParams<float>> grads;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    shuffle(order, shuffle_rng);
    double weighted = 0.0;
    std::uint64_t batch_index = 0;
    for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(config.batch_size), ++batch_index) {
      const std::size_t e = std::min(n, b + static_cast<std::size_t>(config.batch_size));
      const Tensor4<float> target = gather(train_set, order, b, e);
      const Tensor4<float> input =
          config.corruption_fraction > 0.0
              ? corrupt_batch(target, config.corruption_fraction,
                              derive_seed(config.seed, (static_cast<std::uint64_t>(epoch) << 32) | batch_index))
              : target;
      const double loss = loss_and_gradients(model.arch, model.params, input, target, &grads);
      require(std::isfinite(loss), ErrorCode::kNumerical,
              "training diverged: non-finite loss at epoch " + std::to_string(epoch));
      adam.step(model.params, grads);
      weighted += loss * static_cast<double>(e - b);
    }
    const double train_loss = weighted / static_cast<double>(n);
    const double val_loss = val_set.shape().n > 0 ? evaluate_loss(model, val_set, config.batch_size) : train_loss;
    require(std::isfinite(val_loss), ErrorCode::kNumerical,
            "training diverged: non-finite validation loss at epoch " + std::to_string(epoch));
    result.history.train_loss.push_back(train_loss);
    result.history.val_loss.push_back(val_loss);
    if (val_loss < best) {
      best = val_loss;
      result.history.best_epoch = epoch;
      result.model = model;
    }
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);
  }
  return result;
}

double numeric_gradient(const Architecture& arch, std::vector<ConvParams<double>> params, const Tensor4<double>& batch,
                        std::size_t conv_index, std::size_t flat_index, double epsilon) {
  require(conv_index < params.size(), ErrorCode::kInvalidArgument, "conv index out of range");
  auto& block = params[conv_index];
  require(flat_index < block.size(), ErrorCode::kInvalidArgument, "parameter index out of range");
  double& slot = flat_index < block.kernel.size() ? block.kernel[flat_index] : block.bias[flat_index - block.kernel.size()];
  const double original = slot;
  slot = original + epsilon;
  const double plus = loss_and_gradients<double>(arch, params, batch, batch, nullptr);
  slot = original - epsilon;
  const double minus = loss_and_gradients<double>(arch, params, batch, batch, nullptr);
  return (plus - minus) / (2.0 * epsilon);
}

GradientCheckResult gradient_check(const CaeModel& model, const Tensor4<double>& batch, double epsilon,
                                   std::size_t max_checks, std::uint64_t seed) {
  require(epsilon > 0.0, ErrorCode::kInvalidArgument, "gradient_check epsilon must be positive");
  const auto params = convert_params<double>(model.params);
  std::vector<ConvParams<double>> grads;
  loss_and_gradients<double>(model.arch, params, batch, batch, &grads);

  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t c = 0; c < params.size(); ++c) {
    for (std::size_t k = 0; k < params[c].size(); ++k) slots.emplace_back(c, k);
  }
  if (slots.size() > max_checks) {
    Rng rng(seed);
    shuffle(slots, rng);
    slots.resize(max_checks);
    std::sort(slots.begin(), slots.end());
  }

  GradientCheckResult result;
  for (const auto& [c, k] : slots) {
    const double analytic = k < grads[c].kernel.size() ? grads[c].kernel[k] : grads[c].bias[k - grads[c].kernel.size()];
    const double numeric = numeric_gradient(model.arch, params, batch, c, k, epsilon);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
    ++result.checked;
  }
  return result;
}

}  // namespace cad
