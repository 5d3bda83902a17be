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

#include <filesystem>

#include "cad/cae.hpp"
#include "cad/ocsvm.hpp"

namespace cad {

inline constexpr std::uint16_t kCaeFormatVersion = 1;
inline constexpr std::uint16_t kOcSvmFormatVersion = 1;

/// CAEM file, little-endian:
///   "CAEM" u16 version
///   u16 name_len, name bytes
///   u32 input_size
///   u32 encoder_layers, u32 decoder_layers
///   per layer: u8 kind, u32 in_channels, u32 out_channels, u32 kernel, u32 stride, u32 padding
///   per conv:  u32 out, u32 in, u32 k, out*in*k*k f32 kernel, out f32 bias
void save_cae(const CaeModel& model, const std::filesystem::path& path);
CaeModel load_cae(const std::filesystem::path& path);

/// OCSV file, little-endian:
///   "OCSV" u16 version
///   u64 n_train, f64 gamma, f64 rho, u64 m, u64 k
///   m rows of (k f64 support vector, f64 alpha)
///   f64 nu, u8 converged, f64 kkt_residual
void save_ocsvm(const OcSvmModel& model, const std::filesystem::path& path);
OcSvmModel load_ocsvm(const std::filesystem::path& path);

}  // namespace cad
