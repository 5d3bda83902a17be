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

#include "cad/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "cad/error.hpp"

namespace cad {

namespace {

class ByteWriter {
 public:
  template <typename U>
  void uint(U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  void flush_to(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
  }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::kIo, "cannot open model file " + path_);
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  void section(std::string name) { section_ = std::move(name); }

  template <typename U>
  U uint() {
    need(sizeof(U));
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      value |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return value;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const noexcept { return pos_ == bytes_.size(); }
  const std::string& path() const noexcept { return path_; }

 private:
  void need(std::size_t n) const {
    require(pos_ + n <= bytes_.size(), ErrorCode::kTruncated,
            "model file " + path_ + " is truncated in section '" + section_ + "'");
  }

  std::string path_;
  std::string section_ = "header";
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

void check_magic(ByteReader& in, std::string_view magic, std::uint16_t version) {
  in.section("magic");
  const std::string got = in.raw(magic.size());
  require(got == magic, ErrorCode::kBadMagic,
          "model file " + in.path() + " has magic '" + got + "', expected '" + std::string(magic) + "'");
  in.section("version");
  const auto v = in.uint<std::uint16_t>();
  require(v == version, ErrorCode::kVersionMismatch,
          "model file " + in.path() + " has format version " + std::to_string(v) + ", expected " +
              std::to_string(version));
}

void write_layer(ByteWriter& out, const LayerSpec& l) {
  out.uint(static_cast<std::uint8_t>(l.kind));
  out.uint(static_cast<std::uint32_t>(l.in_channels));
  out.uint(static_cast<std::uint32_t>(l.out_channels));
  out.uint(static_cast<std::uint32_t>(l.kernel_size));
  out.uint(static_cast<std::uint32_t>(l.stride));
  out.uint(static_cast<std::uint32_t>(l.padding));
}

LayerSpec read_layer(ByteReader& in) {
  LayerSpec l;
  const auto kind = in.uint<std::uint8_t>();
  require(kind <= static_cast<std::uint8_t>(LayerKind::kUpsample2), ErrorCode::kUnsupportedFormat,
          "unknown layer kind " + std::to_string(kind) + " in " + in.path());
  l.kind = static_cast<LayerKind>(kind);
  l.in_channels = static_cast<int>(in.uint<std::uint32_t>());
  l.out_channels = static_cast<int>(in.uint<std::uint32_t>());
  l.kernel_size = static_cast<int>(in.uint<std::uint32_t>());
  l.stride = static_cast<int>(in.uint<std::uint32_t>());
  l.padding = static_cast<int>(in.uint<std::uint32_t>());
  return l;
}

}  // namespace

void save_cae(const CaeModel& model, const std::filesystem::path& path) {
  ByteWriter out;
  out.raw("CAEM");
  out.uint(kCaeFormatVersion);
  out.uint(static_cast<std::uint16_t>(model.arch.name.size()));
  out.raw(model.arch.name);
  out.uint(static_cast<std::uint32_t>(model.input_size));
  out.uint(static_cast<std::uint32_t>(model.arch.encoder.size()));
  out.uint(static_cast<std::uint32_t>(model.arch.decoder.size()));
  for (const auto& l : model.arch.encoder) write_layer(out, l);
  for (const auto& l : model.arch.decoder) write_layer(out, l);
  std::size_t conv = 0;
  for (const auto* stack : {&model.arch.encoder, &model.arch.decoder}) {
    for (const auto& l : *stack) {
      if (l.kind != LayerKind::kConv) continue;
      const auto& p = model.params.at(conv++);
      out.uint(static_cast<std::uint32_t>(l.out_channels));
      out.uint(static_cast<std::uint32_t>(l.in_channels));
      out.uint(static_cast<std::uint32_t>(l.kernel_size));
      for (float w : p.kernel) out.f32(w);
      for (float b : p.bias) out.f32(b);
    }
  }
  out.flush_to(path);
}

CaeModel load_cae(const std::filesystem::path& path) {
  ByteReader in(path);
  check_magic(in, "CAEM", kCaeFormatVersion);
  CaeModel model;
  in.section("preset name");
  const auto name_len = in.uint<std::uint16_t>();
  model.arch.name = in.raw(name_len);
  in.section("architecture");
  model.input_size = static_cast<int>(in.uint<std::uint32_t>());
  const auto enc = in.uint<std::uint32_t>();
  const auto dec = in.uint<std::uint32_t>();
  require(enc + dec <= 4096, ErrorCode::kUnsupportedFormat, "implausible layer count in " + in.path());
  for (std::uint32_t i = 0; i < enc; ++i) model.arch.encoder.push_back(read_layer(in));
  for (std::uint32_t i = 0; i < dec; ++i) model.arch.decoder.push_back(read_layer(in));
  try {
    model.arch.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kUnsupportedFormat, "invalid architecture in " + in.path() + ": " + e.what());
  }
  int conv_index = 0;
  for (const auto* stack : {&model.arch.encoder, &model.arch.decoder}) {
    for (const auto& l : *stack) {
      if (l.kind != LayerKind::kConv) continue;
      in.section("weights of conv layer " + std::to_string(conv_index++));
      const auto out_ch = in.uint<std::uint32_t>();
      const auto in_ch = in.uint<std::uint32_t>();
      const auto k = in.uint<std::uint32_t>();
      require(static_cast<int>(out_ch) == l.out_channels && static_cast<int>(in_ch) == l.in_channels &&
                  static_cast<int>(k) == l.kernel_size,
              ErrorCode::kUnsupportedFormat, "weight shape header disagrees with the architecture in " + in.path());
      ConvParams<float> p;
      p.kernel.resize(static_cast<std::size_t>(out_ch) * in_ch * k * k);
      for (float& w : p.kernel) w = in.f32();
      p.bias.resize(out_ch);
      for (float& b : p.bias) b = in.f32();
      model.params.push_back(std::move(p));
    }
  }
  require(in.at_end(), ErrorCode::kUnsupportedFormat, "trailing bytes after the last layer in " + in.path());
  return model;
}

void save_ocsvm(const OcSvmModel& model, const std::filesystem::path& path) {
  ByteWriter out;
  out.raw("OCSV");
  out.uint(kOcSvmFormatVersion);
  out.uint(static_cast<std::uint64_t>(model.n_train));
  out.f64(model.gamma);
  out.f64(model.rho);
  out.uint(static_cast<std::uint64_t>(model.alphas.size()));
  out.uint(static_cast<std::uint64_t>(model.support_vectors.cols()));
  for (std::size_t s = 0; s < model.alphas.size(); ++s) {
    for (Eigen::Index j = 0; j < model.support_vectors.cols(); ++j) {
      out.f64(model.support_vectors(static_cast<Eigen::Index>(s), j));
    }
    out.f64(model.alphas[s]);
  }
  out.f64(model.nu);
  out.uint(static_cast<std::uint8_t>(model.converged ? 1 : 0));
  out.f64(model.kkt_residual);
  out.flush_to(path);
}

OcSvmModel load_ocsvm(const std::filesystem::path& path) {
  ByteReader in(path);
  check_magic(in, "OCSV", kOcSvmFormatVersion);
  OcSvmModel model;
  in.section("parameters");
  model.n_train = static_cast<int>(in.uint<std::uint64_t>());
  model.gamma = in.f64();
  model.rho = in.f64();
  const auto m = in.uint<std::uint64_t>();
  const auto k = in.uint<std::uint64_t>();
  require(m <= (1ULL << 28) && k <= (1ULL << 20), ErrorCode::kUnsupportedFormat, "implausible sizes in " + in.path());
  in.section("support vectors");
  model.support_vectors.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
  model.alphas.resize(m);
  for (std::uint64_t s = 0; s < m; ++s) {
    for (std::uint64_t j = 0; j < k; ++j) {
      model.support_vectors(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = in.f64();
    }
    model.alphas[s] = in.f64();
  }
  in.section("solver status");
  model.nu = in.f64();
  model.converged = in.uint<std::uint8_t>() != 0;
  model.kkt_residual = in.f64();
  require(in.at_end(), ErrorCode::kUnsupportedFormat, "trailing bytes in " + in.path());
  return model;
}

}  // namespace cad
