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

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cad/tensor.hpp"

namespace cad {

enum class LayerKind { kConv = 0, kRelu = 1, kSigmoid = 2, kMaxPool2 = 3, kUpsample2 = 4 };

std::string_view to_string(LayerKind kind) noexcept;

struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  int in_channels = 0;
  int out_channels = 0;
  int kernel_size = 0;
  int stride = 1;
  int padding = 0;

  /// Convolution with "same" zero padding (kernel_size / 2).
  static LayerSpec conv(int in_channels, int out_channels, int kernel_size, int stride = 1) {
    return LayerSpec{LayerKind::kConv, in_channels, out_channels, kernel_size, stride, kernel_size / 2};
  }
  static LayerSpec relu() { return LayerSpec{LayerKind::kRelu}; }
  static LayerSpec sigmoid() { return LayerSpec{LayerKind::kSigmoid}; }
  static LayerSpec maxpool2() { return LayerSpec{LayerKind::kMaxPool2}; }
  static LayerSpec upsample2() { return LayerSpec{LayerKind::kUpsample2}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Encoder and decoder layer stacks. The code is the activation after the
/// last encoder layer; the reconstruction is the output of the decoder.
struct Architecture {
  std::string name;
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> decoder;

  int conv_count() const noexcept;
  int input_channels() const;
  /// Throws kInvalidArgument on even kernels, bad strides, non-"same" padding
  /// or channel mismatches between consecutive convolutions.
  void validate() const;
  /// Output shape of the encoder (code_only) or of the full stack.
  Shape4 output_shape(Shape4 input, bool code_only) const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

enum class Preset { kBae1, kBae2, kMvtec };

std::string_view to_string(Preset preset) noexcept;
/// Accepts bae1|bae2|mvtec in any case.
std::optional<Preset> parse_preset(std::string_view text) noexcept;

/// The three compared autoencoders, parametric in the (square, power-of-two)
/// input size. width_divisor shrinks every hidden channel count (minimum 1)
/// for small gradient-check models; 1 gives the full networks.
///
///   BAE1   3 encoder convs 16/8/8, each relu + maxpool2; decoder mirrors with
///          upsample2 before each conv; code 8 x S/8 x S/8.
///   BAE2   2 encoder convs 16/8, each relu + maxpool2; code 8 x S/4 x S/4.
///   MVTEC  8 encoder convs 32,32,32,64,64,128,64,128 (5x5 for the first four,
///          3x3 after). The first log2(S) (at most 8) have stride 2, the rest
///          stride 1, so the code is 128 x 1 x 1. The last encoder conv is
///          linear. Decoder convs mirror the encoder channel plan, each
///          preceded by upsample2 where the mirrored encoder conv had stride 2.
///
/// Every decoder ends in a 3-channel convolution followed by sigmoid.
Architecture make_preset(Preset preset, int input_size, int width_divisor = 1);

template <typename T>
struct ConvParams {
  std::vector<T> kernel;  // [out][in][k][k]
  std::vector<T> bias;    // [out]

  std::size_t size() const noexcept { return kernel.size() + bias.size(); }
  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

template <typename To, typename From>
std::vector<ConvParams<To>> convert_params(const std::vector<ConvParams<From>>& in) {
  std::vector<ConvParams<To>> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i].kernel.assign(in[i].kernel.begin(), in[i].kernel.end());
    out[i].bias.assign(in[i].bias.begin(), in[i].bias.end());
  }
  return out;
}

/// Weights are 32-bit; gradient checking converts to a 64-bit copy.
struct CaeModel {
  Architecture arch;
  int input_size = 0;
  std::vector<ConvParams<float>> params;  // one per conv layer, encoder first

  std::size_t parameter_count() const noexcept;
  Shape4 input_shape(int batch) const { return Shape4{batch, arch.input_channels(), input_size, input_size}; }
  Shape4 code_shape(int batch) const { return arch.output_shape(input_shape(batch), true); }
  std::size_t code_size() const { return code_shape(1).count(); }

  friend bool operator==(const CaeModel&, const CaeModel&) = default;
};

/// Normal initialization, variance 2/fan_in for convolutions followed by
/// relu and 1/fan_in otherwise; zero biases.
CaeModel init_model(const Architecture& arch, int input_size, std::uint64_t seed);

/// Standard deviation init_model uses for a conv layer's kernel.
double init_stddev(const Architecture& arch, std::size_t conv_index);

template <typename T>
struct ForwardOutput {
  Tensor4<T> code;
  Tensor4<T> reconstruction;
};

ForwardOutput<float> forward(const CaeModel& model, const Tensor4<float>& batch);
Tensor4<float> encode(const CaeModel& model, const Tensor4<float>& batch);
Tensor4<float> reconstruct(const CaeModel& model, const Tensor4<float>& batch);

/// Mean over all elements of the squared difference.
template <typename T>
double loss_mse(const Tensor4<T>& reconstruction, const Tensor4<T>& target);

/// Forward + backward for an arbitrary architecture and parameter set.
/// Returns loss_mse(output, target) and, when grads is non-null, fills it with
/// the parameter gradients (same layout as params).
template <typename T>
double loss_and_gradients(const Architecture& arch, const std::vector<ConvParams<T>>& params,
                          const Tensor4<T>& input, const Tensor4<T>& target, std::vector<ConvParams<T>>* grads);

template <typename T>
ForwardOutput<T> forward_with(const Architecture& arch, const std::vector<ConvParams<T>>& params,
                              const Tensor4<T>& input);

/// Zeroes exactly floor(fraction * elements_per_sample) distinct, uniformly
/// chosen elements of every sample (partial Fisher-Yates per sample).
Tensor4<float> corrupt_batch(const Tensor4<float>& batch, double fraction, std::uint64_t seed);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam state for one parameter set. A zero gradient on fresh state leaves
/// the parameters unchanged.
class AdamOptimizer {
 public:
  AdamOptimizer(const std::vector<ConvParams<float>>& shape_like, AdamConfig config);
  void step(std::vector<ConvParams<float>>& params, const std::vector<ConvParams<float>>& grads);
  long steps() const noexcept { return t_; }

 private:
  AdamConfig config_;
  std::vector<ConvParams<float>> m_;
  std::vector<ConvParams<float>> v_;
  long t_ = 0;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 5;
  AdamConfig adam;
  std::uint64_t seed = 42;
  double corruption_fraction = 0.0;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = 0;  // 1-based

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct TrainResult {
  CaeModel model;
  TrainHistory history;
};

using EpochCallback = std::function<void(int epoch, double train_loss, double val_loss)>;

/// Adam on loss_mse over mini-batches reshuffled every epoch. Returns the
/// parameters of the epoch with the lowest validation loss (the lowest
/// training loss when val_set is empty). Non-finite losses raise kNumerical
/// naming the epoch.
TrainResult train(CaeModel model, const Tensor4<float>& train_set, const Tensor4<float>& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Central difference d loss / d param for one parameter, 64-bit.
/// flat_index counts kernel entries first, then bias entries.
double numeric_gradient(const Architecture& arch, std::vector<ConvParams<double>> params, const Tensor4<double>& batch,
                        std::size_t conv_index, std::size_t flat_index, double epsilon);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

/// Compares analytic gradients of loss_mse(reconstruct(batch), batch) with
/// central differences on up to max_checks sampled parameters (all of them
/// when the model is that small). Relative error is
/// |a - n| / max(|a|, |n|, 1e-8).
GradientCheckResult gradient_check(const CaeModel& model, const Tensor4<double>& batch, double epsilon,
                                   std::size_t max_checks = 256, std::uint64_t seed = 7);

}  // namespace cad
