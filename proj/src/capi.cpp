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

#include "cad/cad.h"

#include <algorithm>
#include <cstring>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "cad/cae.hpp"
#include "cad/datasynth.hpp"
#include "cad/error.hpp"
#include "cad/evaluation.hpp"
#include "cad/image.hpp"
#include "cad/metrics.hpp"
#include "cad/model_io.hpp"
#include "cad/ocsvm.hpp"
#include "cad/pipeline.hpp"

struct cad_image {
  cad::Image value;
};
struct cad_cae {
  cad::CaeModel value;
};
struct cad_ocsvm {
  cad::OcSvmModel value;
};
struct cad_config {
  cad::ExperimentConfig value;
};
struct cad_report {
  std::vector<cad::EvaluationReport> value;
};

namespace {

thread_local std::string g_last_error;

cad_status record(cad_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
cad_status guarded(F&& body) {
  try {
    body();
    return CAD_OK;
  } catch (const cad::Error& e) {
    return record(static_cast<cad_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return record(CAD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return record(CAD_ERR_INTERNAL, e.what());
  } catch (...) {
    return record(CAD_ERR_INTERNAL, "unknown exception");
  }
}

void need(const void* p, const char* what) {
  cad::require(p != nullptr, cad::ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

void copy_string(const std::string& s, char* buffer, size_t capacity, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (buffer && capacity > 0) {
    const size_t n = std::min(capacity - 1, s.size());
    std::memcpy(buffer, s.data(), n);
    buffer[n] = '\0';
  }
}

template <typename Handle, typename T>
void emit(Handle** out, T&& value) {
  need(out, "out");
  *out = new Handle{std::forward<T>(value)};
}

cad::Logger make_logger(cad_log_fn log, void* user) {
  if (!log) return {};
  return [log, user](const std::string& line) { log(line.c_str(), user); };
}

const cad::EvaluationReport& report_at(const cad_report* report, size_t index) {
  need(report, "report");
  cad::require(index < report->value.size(), cad::ErrorCode::kInvalidArgument, "report index out of range");
  return report->value[index];
}

}  // namespace

extern "C" {

const char* cad_version(void) { return "1.0.0"; }

const char* cad_status_name(cad_status status) {
  if (status == CAD_OK) return "ok";
  if (status == CAD_ERR_INTERNAL) return "internal_error";
  if (status >= CAD_ERR_INVALID_ARGUMENT && status <= CAD_ERR_DEGENERATE_DATA) {
    return cad::error_code_name(static_cast<cad::ErrorCode>(status));
  }
  return "unknown";
}

const char* cad_last_error(void) { return g_last_error.c_str(); }

cad_status cad_image_new(int height, int width, int channels, const double* pixels, cad_image** out) {
  return guarded([&] {
    need(pixels, "pixels");
    cad::require(height >= 1 && width >= 1 && (channels == 1 || channels == 3), cad::ErrorCode::kInvalidArgument,
                 "image dimensions must be positive with 1 or 3 channels");
    const size_t n = static_cast<size_t>(height) * static_cast<size_t>(width) * static_cast<size_t>(channels);
    cad::Image img(height, width, channels, std::vector<double>(pixels, pixels + n));
    img.validate();
    emit(out, std::move(img));
  });
}

cad_status cad_image_load(const char* path, cad_image** out) {
  return guarded([&] {
    need(path, "path");
    emit(out, cad::load_image(path));
  });
}

cad_status cad_image_save(const cad_image* image, const char* path) {
  return guarded([&] {
    need(image, "image");
    need(path, "path");
    cad::save_image(image->value, path);
  });
}

void cad_image_free(cad_image* image) { delete image; }

cad_status cad_image_shape(const cad_image* image, int* height, int* width, int* channels) {
  return guarded([&] {
    need(image, "image");
    if (height) *height = image->value.height();
    if (width) *width = image->value.width();
    if (channels) *channels = image->value.channels();
  });
}

cad_status cad_image_pixels(const cad_image* image, double* buffer, size_t capacity) {
  return guarded([&] {
    need(image, "image");
    need(buffer, "buffer");
    const auto px = image->value.pixels();
    cad::require(capacity >= px.size(), cad::ErrorCode::kInvalidArgument,
                 "buffer holds " + std::to_string(capacity) + " values, image has " + std::to_string(px.size()));
    std::copy(px.begin(), px.end(), buffer);
  });
}

cad_status cad_image_grayscale(const cad_image* image, cad_image** out) {
  return guarded([&] {
    need(image, "image");
    emit(out, cad::to_grayscale(image->value));
  });
}

cad_status cad_image_rotate90(const cad_image* image, int quarter_turns, cad_image** out) {
  return guarded([&] {
    need(image, "image");
    emit(out, cad::rotate90(image->value, quarter_turns));
  });
}

cad_status cad_image_crop(const cad_image* image, double threshold, cad_image** out) {
  return guarded([&] {
    need(image, "image");
    emit(out, cad::bounding_box_crop(image->value, threshold));
  });
}

cad_status cad_image_resize(const cad_image* image, int height, int width, cad_image** out) {
  return guarded([&] {
    need(image, "image");
    emit(out, cad::resize_bilinear(image->value, height, width));
  });
}

cad_status cad_synth_sample(const char* kind, uint64_t seed, int image_size, cad_image** out) {
  return guarded([&] {
    need(kind, "kind");
    const auto k = cad::parse_defect_kind(kind);
    cad::require(k.has_value(), cad::ErrorCode::kInvalidArgument, std::string("unknown defect kind '") + kind + "'");
    cad::SynthParams params;
    params.image_size = image_size;
    params.validate();
    emit(out, cad::synth_sample(*k, seed, params));
  });
}

cad_status cad_l2_error(const cad_image* x, const cad_image* xhat, double* out) {
  return guarded([&] {
    need(x, "x");
    need(xhat, "xhat");
    need(out, "out");
    *out = cad::l2_error(x->value, xhat->value);
  });
}

cad_status cad_ssim(const cad_image* x, const cad_image* xhat, double* out) {
  return guarded([&] {
    need(x, "x");
    need(xhat, "xhat");
    need(out, "out");
    *out = cad::ssim(x->value, xhat->value).mean;
  });
}

cad_status cad_auc(const double* scores, const int* labels, size_t n, double* out) {
  return guarded([&] {
    need(scores, "scores");
    need(labels, "labels");
    need(out, "out");
    *out = cad::auc(std::span(scores, n), std::span(labels, n));
  });
}

cad_status cad_cae_init(const char* preset, int input_size, uint64_t seed, cad_cae** out) {
  return guarded([&] {
    need(preset, "preset");
    const auto p = cad::parse_preset(preset);
    cad::require(p.has_value(), cad::ErrorCode::kInvalidArgument, std::string("unknown preset '") + preset + "'");
    emit(out, cad::init_model(cad::make_preset(*p, input_size), input_size, seed));
  });
}

cad_status cad_cae_load(const char* path, cad_cae** out) {
  return guarded([&] {
    need(path, "path");
    emit(out, cad::load_cae(path));
  });
}

cad_status cad_cae_save(const cad_cae* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    cad::save_cae(model->value, path);
  });
}

void cad_cae_free(cad_cae* model) { delete model; }

cad_status cad_cae_info(const cad_cae* model, int* input_size, size_t* code_size, size_t* parameter_count) {
  return guarded([&] {
    need(model, "model");
    if (input_size) *input_size = model->value.input_size;
    if (code_size) *code_size = model->value.code_size();
    if (parameter_count) *parameter_count = model->value.parameter_count();
  });
}

cad_status cad_cae_reconstruct(const cad_cae* model, const cad_image* image, cad_image** out) {
  return guarded([&] {
    need(model, "model");
    need(image, "image");
    const auto recon = cad::reconstruct(model->value, cad::to_tensor(std::span(&image->value, 1)));
    emit(out, cad::to_image(recon, 0));
  });
}

cad_status cad_cae_encode(const cad_cae* model, const cad_image* image, double* code, size_t capacity) {
  return guarded([&] {
    need(model, "model");
    need(image, "image");
    need(code, "code");
    const auto c = cad::encode(model->value, cad::to_tensor(std::span(&image->value, 1)));
    cad::require(capacity >= c.size(), cad::ErrorCode::kInvalidArgument,
                 "code buffer holds " + std::to_string(capacity) + " values, code has " + std::to_string(c.size()));
    std::copy(c.vec().begin(), c.vec().end(), code);
  });
}

cad_status cad_ocsvm_fit(const double* x, size_t n, size_t k, double nu, double gamma, cad_ocsvm** out) {
  return guarded([&] {
    need(x, "x");
    cad::require(n >= 1 && k >= 1, cad::ErrorCode::kInvalidArgument, "n and k must be positive");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < k; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x[i * k + j];
    }
    cad::OcSvmConfig config;
    config.nu = nu;
    if (gamma > 0.0) config.gamma = gamma;
    emit(out, cad::ocsvm_fit(m, config));
  });
}

cad_status cad_ocsvm_load(const char* path, cad_ocsvm** out) {
  return guarded([&] {
    need(path, "path");
    emit(out, cad::load_ocsvm(path));
  });
}

cad_status cad_ocsvm_save(const cad_ocsvm* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    cad::save_ocsvm(model->value, path);
  });
}

void cad_ocsvm_free(cad_ocsvm* model) { delete model; }

cad_status cad_ocsvm_info(const cad_ocsvm* model, size_t* dim, size_t* support_vectors, double* rho, double* gamma,
                          int* converged) {
  return guarded([&] {
    need(model, "model");
    const auto& m = model->value;
    if (dim) *dim = static_cast<size_t>(m.dim());
    if (support_vectors) *support_vectors = m.alphas.size();
    if (rho) *rho = m.rho;
    if (gamma) *gamma = m.gamma;
    if (converged) *converged = m.converged ? 1 : 0;
  });
}

cad_status cad_ocsvm_decision(const cad_ocsvm* model, const double* x, size_t k, double* out) {
  return guarded([&] {
    need(model, "model");
    need(x, "x");
    need(out, "out");
    cad::require(k == static_cast<size_t>(model->value.dim()), cad::ErrorCode::kShapeMismatch,
                 "point has " + std::to_string(k) + " values, model expects " + std::to_string(model->value.dim()));
    const Eigen::Map<const Eigen::RowVectorXd> row(x, static_cast<Eigen::Index>(k));
    *out = cad::decision(model->value, row);
  });
}

cad_status cad_config_new(cad_config** out) {
  return guarded([&] { emit(out, cad::ExperimentConfig{}); });
}

cad_status cad_config_new_full_scale(cad_config** out) {
  return guarded([&] { emit(out, cad::full_scale_config()); });
}

void cad_config_free(cad_config* config) { delete config; }

cad_status cad_config_load(cad_config* config, const char* path) {
  return guarded([&] {
    need(config, "config");
    need(path, "path");
    config->value.load_file(path);
  });
}

cad_status cad_config_set(cad_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    config->value.set(key, value);
  });
}

cad_status cad_config_get(const cad_config* config, const char* key, char* buffer, size_t capacity, size_t* needed) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    copy_string(config->value.get(key), buffer, capacity, needed);
  });
}

size_t cad_config_key_count(void) { return cad::config_keys().size(); }

const char* cad_config_key(size_t index) {
  static const std::vector<std::string> keys = cad::config_keys();
  return index < keys.size() ? keys[index].c_str() : nullptr;
}

cad_status cad_run_stage(const cad_config* config, const char* stage, cad_log_fn log, void* user,
                         cad_report** report) {
  return guarded([&] {
    need(config, "config");
    need(stage, "stage");
    if (report) *report = nullptr;
    const auto logger = make_logger(log, user);
    const std::string s = stage;
    const auto& cfg = config->value;
    if (s == "synth") {
      cad::stage_synth(cfg, logger);
    } else if (s == "train") {
      cad::stage_train(cfg, logger);
    } else if (s == "features") {
      cad::stage_features(cfg, logger);
    } else if (s == "embed") {
      cad::stage_embed(cfg, logger);
    } else if (s == "fit-svm") {
      cad::stage_fit_svm(cfg, logger);
    } else if (s == "evaluate") {
      auto r = cad::stage_evaluate(cfg, logger);
      if (report) *report = new cad_report{{std::move(r)}};
    } else {
      cad::fail(cad::ErrorCode::kInvalidArgument, "unknown stage '" + s + "'");
    }
  });
}

cad_status cad_run_all(const cad_config* config, const char* modes, cad_log_fn log, void* user, cad_report** report) {
  return guarded([&] {
    need(config, "config");
    if (report) *report = nullptr;
    std::vector<cad::FeatureMode> selected;
    const std::string text = modes ? modes : "all";
    if (text == "all" || text.empty()) {
      selected.assign(cad::kAllFeatureModes.begin(), cad::kAllFeatureModes.end());
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto m = cad::parse_feature_mode(item);
        cad::require(m.has_value(), cad::ErrorCode::kInvalidArgument, "unknown feature mode '" + item + "'");
        selected.push_back(*m);
      }
    }
    auto reports = cad::run_all(config->value, selected, make_logger(log, user));
    if (report) *report = new cad_report{std::move(reports)};
  });
}

void cad_report_free(cad_report* report) { delete report; }

size_t cad_report_count(const cad_report* report) { return report ? report->value.size() : 0; }

cad_status cad_report_auc(const cad_report* report, size_t index, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = report_at(report, index).auc_overall;
  });
}

cad_status cad_report_mode(const cad_report* report, size_t index, char* buffer, size_t capacity, size_t* needed) {
  return guarded([&] { copy_string(std::string(cad::to_string(report_at(report, index).mode)), buffer, capacity, needed); });
}

cad_status cad_report_text(const cad_report* report, size_t index, char* buffer, size_t capacity, size_t* needed) {
  return guarded([&] { copy_string(report_at(report, index).to_text(), buffer, capacity, needed); });
}

cad_status cad_report_kv(const cad_report* report, size_t index, char* buffer, size_t capacity, size_t* needed) {
  return guarded([&] { copy_string(report_at(report, index).to_kv(), buffer, capacity, needed); });
}

}  // extern "C"
