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

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cad/cae.hpp"
#include "cad/datasynth.hpp"
#include "cad/dimred.hpp"
#include "cad/evaluation.hpp"
#include "cad/metrics.hpp"
#include "cad/ocsvm.hpp"

namespace cad {

enum class FeatureMode { kErrorMetrics, kPcaTsne, kRawEncoded };

inline constexpr std::array<FeatureMode, 3> kAllFeatureModes = {FeatureMode::kErrorMetrics, FeatureMode::kPcaTsne,
                                                                FeatureMode::kRawEncoded};

std::string_view to_string(FeatureMode mode) noexcept;
std::optional<FeatureMode> parse_feature_mode(std::string_view text) noexcept;

/// Everything one experiment needs. Every field has a `key = value` name in
/// the config file format; see config_keys().
struct ExperimentConfig {
  std::filesystem::path dataset_dir = "dataset";
  std::filesystem::path manifest;  // empty: dataset_dir/manifest.csv
  std::filesystem::path out_dir = "out";
  std::filesystem::path cae_model;  // non-empty: load instead of training
  std::uint64_t seed = 42;

  int image_size = 64;
  double crop_threshold = kDefaultCropThreshold;
  Preset preset = Preset::kMvtec;
  TrainConfig train;
  FeatureMode mode = FeatureMode::kErrorMetrics;
  int pca_dims = 50;
  TsneConfig tsne;
  OcSvmConfig ocsvm;
  bool standardize_features = false;
  SsimParams ssim;

  SynthParams synth{64};
  SplitCounts counts = kDeskScaleCounts;
  NokRatio nok_ratio = kDefaultNokRatio;

  std::filesystem::path manifest_path() const { return manifest.empty() ? dataset_dir / "manifest.csv" : manifest; }

  /// Sets one field from its config key. Throws kInvalidArgument on unknown
  /// keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  /// Current value of a key, formatted as set() accepts it.
  std::string get(std::string_view key) const;
  /// Reads `key = value` lines; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  void validate() const;
};

/// Documented config keys in a stable order.
std::vector<std::string> config_keys();

/// Full-size template: 256x256 inputs and 1000 / 2000 / 200 + 200 samples.
ExperimentConfig full_scale_config();

/// Sub-seeds drawn from the master seed.
struct StageSeeds {
  std::uint64_t dataset;
  std::uint64_t cae_init;
  std::uint64_t cae_train;
  std::uint64_t tsne;
};
StageSeeds stage_seeds(std::uint64_t master) noexcept;

struct ClassStats {
  DefectKind label;
  std::vector<double> mean;
  std::vector<double> variance;  // sample variance (n - 1)
};

struct GridCell {
  double nu;
  double gamma_factor;  // multiplier on the configured gamma
  double auc;
};

struct Confusion {
  int tp = 0, fp = 0, tn = 0, fn = 0;  // NOK = positive, outlier = predicted positive
  int total() const noexcept { return tp + fp + tn + fn; }
};

struct EvaluationReport {
  FeatureMode mode = FeatureMode::kErrorMetrics;
  std::string preset;
  std::uint64_t seed = 0;
  int n_fit = 0;
  int n_test = 0;
  int feature_dim = 0;
  double auc_overall = 0.0;
  std::map<DefectKind, double> auc_by_class;  // test OK vs each NOK class
  Confusion confusion;
  std::vector<ClassStats> class_stats;  // over val + test points
  std::optional<double> tsne_kl;
  bool ocsvm_converged = true;
  double ocsvm_residual = 0.0;
  double ocsvm_gamma = 0.0;
  double ocsvm_rho = 0.0;
  std::size_t support_vectors = 0;
  std::vector<GridCell> grid;
  std::map<std::string, std::string> files;

  /// Flat key=value lines, stable order.
  std::string to_kv() const;
  std::string to_text() const;
};

/// Writes a status line per stage step; default is silent.
using Logger = std::function<void(const std::string&)>;

/// Loads and preprocesses one manifest split: bounding-box crop then
/// bilinear resize to image_size x image_size.
std::vector<LabeledImage> load_split(const DatasetManifest& manifest, const std::filesystem::path& root, Split split,
                                     int image_size, double crop_threshold);
Image preprocess(const Image& raw, int image_size, double crop_threshold);

// Stages. Each reads its inputs from config.dataset_dir / config.out_dir and
// writes its outputs to config.out_dir. Errors are rethrown prefixed with
// "[stage] ".
DatasetManifest stage_synth(const ExperimentConfig& config, const Logger& log = {});
TrainResult stage_train(const ExperimentConfig& config, const Logger& log = {});
void stage_features(const ExperimentConfig& config, const Logger& log = {});
void stage_embed(const ExperimentConfig& config, const Logger& log = {});
OcSvmModel stage_fit_svm(const ExperimentConfig& config, const Logger& log = {});
EvaluationReport stage_evaluate(const ExperimentConfig& config, const Logger& log = {});

/// Trains (or loads) the CAE, then features -> [embed] -> fit-svm ->
/// evaluate for config.mode. Assumes the dataset exists.
EvaluationReport run_experiment(const ExperimentConfig& config, const Logger& log = {});

/// synth, train once, then every mode in `modes`; writes summary.txt/.kv.
std::vector<EvaluationReport> run_all(const ExperimentConfig& config, std::span<const FeatureMode> modes,
                                      const Logger& log = {});

/// Output file names inside out_dir.
std::filesystem::path cae_model_path(const ExperimentConfig& config);
std::filesystem::path features_path(const ExperimentConfig& config, FeatureMode mode);
std::filesystem::path codes_path(const ExperimentConfig& config);
std::filesystem::path ocsvm_path(const ExperimentConfig& config, FeatureMode mode);

}  // namespace cad
