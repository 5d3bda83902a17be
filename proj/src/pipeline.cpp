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

#include "cad/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "cad/error.hpp"
#include "cad/model_io.hpp"
#include "cad/rng.hpp"

namespace cad {

std::string_view to_string(FeatureMode mode) noexcept {
  switch (mode) {
    case FeatureMode::kErrorMetrics: return "error_metrics";
    case FeatureMode::kPcaTsne: return "pca_tsne";
    case FeatureMode::kRawEncoded: return "raw_encoded";
  }
  return "error_metrics";
}

std::optional<FeatureMode> parse_feature_mode(std::string_view text) noexcept {
  for (FeatureMode m : kAllFeatureModes) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  T value{};
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  require(res.ec == std::errc() && res.ptr == t.data() + t.size() && !t.empty(), ErrorCode::kInvalidArgument,
          "config key '" + std::string(key) + "': cannot parse '" + t + "'");
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "on" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "off" || t == "no") return false;
  fail(ErrorCode::kInvalidArgument, "config key '" + std::string(key) + "': expected a boolean, got '" + t + "'");
}

template <typename T>
std::string show(T v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return format_double(v);
  } else {
    return std::to_string(v);
  }
}

struct KeyHandler {
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define CAD_NUMBER(path, type)                                                                   \
  KeyHandler {                                                                                   \
    [](ExperimentConfig& c, std::string_view v) { c.path = parse_number<type>(#path, v); },      \
        [](const ExperimentConfig& c) { return show(c.path); }                                   \
  }

#define CAD_PATH(path)                                                                           \
  KeyHandler {                                                                                   \
    [](ExperimentConfig& c, std::string_view v) { c.path = trim(v); },                           \
        [](const ExperimentConfig& c) { return c.path.string(); }                                \
  }

const std::vector<std::pair<std::string, KeyHandler>>& key_table() {
  static const std::vector<std::pair<std::string, KeyHandler>> table = {
      {"dataset_dir", CAD_PATH(dataset_dir)},
      {"manifest", CAD_PATH(manifest)},
      {"out_dir", CAD_PATH(out_dir)},
      {"cae_model", CAD_PATH(cae_model)},
      {"seed", CAD_NUMBER(seed, std::uint64_t)},
      {"image_size", CAD_NUMBER(image_size, int)},
      {"crop_threshold", CAD_NUMBER(crop_threshold, double)},
      {"preset",
       {[](ExperimentConfig& c, std::string_view v) {
          const auto p = parse_preset(trim(v));
          require(p.has_value(), ErrorCode::kInvalidArgument, "config key 'preset': expected bae1|bae2|mvtec");
          c.preset = *p;
        },
        [](const ExperimentConfig& c) {
          std::string s(to_string(c.preset));
          std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
          return s;
        }}},
      {"mode",
       {[](ExperimentConfig& c, std::string_view v) {
          const auto m = parse_feature_mode(trim(v));
          require(m.has_value(), ErrorCode::kInvalidArgument,
                  "config key 'mode': expected error_metrics|pca_tsne|raw_encoded");
          c.mode = *m;
        },
        [](const ExperimentConfig& c) { return std::string(to_string(c.mode)); }}},
      {"epochs", CAD_NUMBER(train.epochs, int)},
      {"batch_size", CAD_NUMBER(train.batch_size, int)},
      {"learning_rate", CAD_NUMBER(train.adam.learning_rate, double)},
      {"corruption_fraction", CAD_NUMBER(train.corruption_fraction, double)},
      {"pca_dims", CAD_NUMBER(pca_dims, int)},
      {"standardize_features",
       {[](ExperimentConfig& c, std::string_view v) { c.standardize_features = parse_bool("standardize_features", v); },
        [](const ExperimentConfig& c) { return show(c.standardize_features); }}},
      {"tsne.perplexity", CAD_NUMBER(tsne.perplexity, double)},
      {"tsne.iterations", CAD_NUMBER(tsne.iterations, int)},
      {"tsne.learning_rate", CAD_NUMBER(tsne.learning_rate, double)},
      {"tsne.early_exaggeration", CAD_NUMBER(tsne.early_exaggeration, double)},
      {"tsne.exaggeration_iterations", CAD_NUMBER(tsne.exaggeration_iterations, int)},
      {"ocsvm.nu", CAD_NUMBER(ocsvm.nu, double)},
      {"ocsvm.gamma",
       {[](ExperimentConfig& c, std::string_view v) {
          const std::string t = trim(v);
          if (t == "scale") {
            c.ocsvm.gamma.reset();
          } else {
            c.ocsvm.gamma = parse_number<double>("ocsvm.gamma", t);
          }
        },
        [](const ExperimentConfig& c) { return c.ocsvm.gamma ? show(*c.ocsvm.gamma) : std::string("scale"); }}},
      {"ocsvm.kkt_tolerance", CAD_NUMBER(ocsvm.kkt_tolerance, double)},
      {"ocsvm.max_passes", CAD_NUMBER(ocsvm.max_passes, long)},
      {"ssim.window_size", CAD_NUMBER(ssim.window_size, int)},
      {"ssim.sigma", CAD_NUMBER(ssim.gaussian_sigma, double)},
      {"synth.image_size", CAD_NUMBER(synth.image_size, int)},
      {"synth.ring_outer_radius", CAD_NUMBER(synth.ring_outer_radius, double)},
      {"synth.ring_inner_radius", CAD_NUMBER(synth.ring_inner_radius, double)},
      {"synth.texture_amplitude", CAD_NUMBER(synth.texture_amplitude, double)},
      {"synth.background_level", CAD_NUMBER(synth.background_level, double)},
      {"synth.defect_magnitude", CAD_NUMBER(synth.defect_magnitude, double)},
      {"synth.train_ok", CAD_NUMBER(counts.train_ok, int)},
      {"synth.val_ok", CAD_NUMBER(counts.val_ok, int)},
      {"synth.test_ok", CAD_NUMBER(counts.test_ok, int)},
      {"synth.test_nok", CAD_NUMBER(counts.test_nok, int)},
      {"synth.nok_ratio",
       {[](ExperimentConfig& c, std::string_view v) {
          std::vector<double> parts;
          std::stringstream ss{std::string(v)};
          std::string item;
          while (std::getline(ss, item, ':')) parts.push_back(parse_number<double>("synth.nok_ratio", item));
          require(parts.size() == 3, ErrorCode::kInvalidArgument,
                  "config key 'synth.nok_ratio': expected three ':'-separated fractions");
          c.nok_ratio = {parts[0], parts[1], parts[2]};
        },
        [](const ExperimentConfig& c) {
          return show(c.nok_ratio[0]) + ":" + show(c.nok_ratio[1]) + ":" + show(c.nok_ratio[2]);
        }}},
  };
  return table;
}

#undef CAD_NUMBER
#undef CAD_PATH

const KeyHandler& handler_for(std::string_view key) {
  for (const auto& [name, handler] : key_table()) {
    if (name == key) return handler;
  }
  fail(ErrorCode::kInvalidArgument, "unknown config key '" + std::string(key) + "'");
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& entry : key_table()) keys.push_back(entry.first);
  return keys;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) { handler_for(trim(key)).set(*this, value); }

std::string ExperimentConfig::get(std::string_view key) const { return handler_for(trim(key)).get(*this); }

void ExperimentConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::kInvalidArgument,
            path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
    try {
      set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      fail(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void ExperimentConfig::validate() const {
  require(image_size >= 8 && std::has_single_bit(static_cast<unsigned>(image_size)), ErrorCode::kInvalidArgument,
          "image_size must be a power of two >= 8");
  require(crop_threshold >= 0.0 && crop_threshold < 1.0, ErrorCode::kInvalidArgument, "crop_threshold must be in [0,1)");
  require(pca_dims >= 1, ErrorCode::kInvalidArgument, "pca_dims must be >= 1");
  train.validate();
  ocsvm.validate();
  ssim.validate();
  synth.validate();
}

ExperimentConfig full_scale_config() {
  ExperimentConfig c;
  c.image_size = 256;
  c.synth.image_size = 256;
  c.counts = kFullScaleCounts;
  return c;
}

StageSeeds stage_seeds(std::uint64_t master) noexcept {
  return StageSeeds{master, derive_seed(master, 101), derive_seed(master, 102), derive_seed(master, 103)};
}

std::filesystem::path cae_model_path(const ExperimentConfig& config) {
  std::string name(to_string(config.preset));
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return config.out_dir / ("cae_" + name + ".caem");
}

std::filesystem::path features_path(const ExperimentConfig& config, FeatureMode mode) {
  return config.out_dir / ("features_" + std::string(to_string(mode)) + ".csv");
}

std::filesystem::path codes_path(const ExperimentConfig& config) { return config.out_dir / "codes.csv"; }

std::filesystem::path ocsvm_path(const ExperimentConfig& config, FeatureMode mode) {
  return config.out_dir / ("ocsvm_" + std::string(to_string(mode)) + ".ocsv");
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string label_key(DefectKind kind) {
  std::string s(to_string(kind));
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

}  // namespace

std::string EvaluationReport::to_kv() const {
  std::ostringstream out;
  out << "mode=" << to_string(mode) << '\n'
      << "preset=" << preset << '\n'
      << "seed=" << seed << '\n'
      << "n_fit=" << n_fit << '\n'
      << "n_test=" << n_test << '\n'
      << "feature_dim=" << feature_dim << '\n'
      << "auc_overall=" << format_double(auc_overall) << '\n';
  for (const auto& [kind, value] : auc_by_class) out << "auc." << label_key(kind) << '=' << format_double(value) << '\n';
  out << "confusion.tp=" << confusion.tp << '\n'
      << "confusion.fp=" << confusion.fp << '\n'
      << "confusion.tn=" << confusion.tn << '\n'
      << "confusion.fn=" << confusion.fn << '\n';
  if (tsne_kl) out << "tsne_kl=" << format_double(*tsne_kl) << '\n';
  out << "ocsvm.converged=" << (ocsvm_converged ? "true" : "false") << '\n'
      << "ocsvm.kkt_residual=" << format_double(ocsvm_residual) << '\n'
      << "ocsvm.gamma=" << format_double(ocsvm_gamma) << '\n'
      << "ocsvm.rho=" << format_double(ocsvm_rho) << '\n'
      << "ocsvm.support_vectors=" << support_vectors << '\n';
  for (const auto& s : class_stats) {
    for (std::size_t j = 0; j < s.mean.size(); ++j) {
      out << "stats." << label_key(s.label) << ".f" << j + 1 << ".mean=" << format_double(s.mean[j]) << '\n'
          << "stats." << label_key(s.label) << ".f" << j + 1 << ".var=" << format_double(s.variance[j]) << '\n';
    }
  }
  for (const auto& g : grid) {
    out << "grid.nu_" << format_double(g.nu) << ".gamma_x" << format_double(g.gamma_factor) << "=" << format_double(g.auc)
        << '\n';
  }
  for (const auto& [name, path] : files) out << "file." << name << '=' << path << '\n';
  return out.str();
}

std::string EvaluationReport::to_text() const {
  char buf[160];
  std::ostringstream out;
  out << "Evaluation report\n"
      << "  feature mode      : " << to_string(mode) << '\n'
      << "  autoencoder       : " << preset << '\n'
      << "  master seed       : " << seed << '\n'
      << "  OC-SVM fit points : " << n_fit << " (validation OK)\n"
      << "  test points       : " << n_test << '\n'
      << "  feature dimension : " << feature_dim << "\n\n";
  std::snprintf(buf, sizeof buf, "  AUC overall (NOK vs OK)     : %.4f\n", auc_overall);
  out << buf;
  for (const auto& [kind, value] : auc_by_class) {
    std::snprintf(buf, sizeof buf, "  AUC %-24s: %.4f\n", std::string(to_string(kind)).c_str(), value);
    out << buf;
  }
  out << "\n  Confusion at the OC-SVM boundary (NOK = positive)\n";
  std::snprintf(buf, sizeof buf, "    TP %4d   FN %4d\n    FP %4d   TN %4d\n", confusion.tp, confusion.fn, confusion.fp,
                confusion.tn);
  out << buf;
  std::snprintf(buf, sizeof buf, "\n  OC-SVM: gamma %.6g, rho %.6g, %zu support vectors, %s (KKT residual %.3g)\n",
                ocsvm_gamma, ocsvm_rho, support_vectors, ocsvm_converged ? "converged" : "NOT converged",
                ocsvm_residual);
  out << buf;
  if (tsne_kl) {
    std::snprintf(buf, sizeof buf, "  t-SNE final KL divergence: %.6f\n", *tsne_kl);
    out << buf;
  }
  if (feature_dim <= 4) {
    out << "\n  Per-class feature statistics (validation + test)\n";
    for (const auto& s : class_stats) {
      for (std::size_t j = 0; j < s.mean.size(); ++j) {
        std::snprintf(buf, sizeof buf, "    %-15s f%zu mean %12.6g  var %12.6g\n", std::string(to_string(s.label)).c_str(),
                      j + 1, s.mean[j], s.variance[j]);
        out << buf;
      }
    }
  }
  if (!grid.empty()) {
    out << "\n  AUC over the nu x gamma grid (gamma as multiple of the configured value)\n";
    for (const auto& g : grid) {
      std::snprintf(buf, sizeof buf, "    nu %-5g gamma x%-5g : %.4f\n", g.nu, g.gamma_factor, g.auc);
      out << buf;
    }
  }
  if (!files.empty()) {
    out << "\n  Files\n";
    for (const auto& [name, path] : files) out << "    " << name << ": " << path << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Stages

Image preprocess(const Image& raw, int image_size, double crop_threshold) {
  return resize_bilinear(bounding_box_crop(raw, crop_threshold), image_size, image_size);
}

std::vector<LabeledImage> load_split(const DatasetManifest& manifest, const std::filesystem::path& root, Split split,
                                     int image_size, double crop_threshold) {
  std::vector<LabeledImage> out;
  for (const ManifestRecord* rec : manifest.select(split)) {
    Image raw = load_image(root / rec->path);
    require(raw.channels() == 3, ErrorCode::kUnsupportedFormat, "sample " + rec->sample_id + " is not an RGB image");
    out.push_back(LabeledImage{rec->sample_id, rec->label, preprocess(raw, image_size, crop_threshold)});
  }
  return out;
}

namespace {

template <typename F>
auto in_stage(std::string_view stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    fail(e.code(), "[" + std::string(stage) + "] " + e.what());
  } catch (const std::exception& e) {
    fail(ErrorCode::kIo, "[" + std::string(stage) + "] " + e.what());
  }
}

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

void ensure_out_dir(const ExperimentConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create output directory " + config.out_dir.string() + ": " + ec.message());
}

DatasetManifest load_manifest(const ExperimentConfig& config) { return read_manifest(config.manifest_path()); }

std::filesystem::path manifest_root(const ExperimentConfig& config) { return config.manifest_path().parent_path(); }

CaeModel load_trained_model(const ExperimentConfig& config) {
  const auto path = config.cae_model.empty() ? cae_model_path(config) : config.cae_model;
  require(std::filesystem::exists(path), ErrorCode::kIo,
          "no trained autoencoder at " + path.string() + " (run the train stage first)");
  CaeModel model = load_cae(path);
  require(model.input_size == config.image_size, ErrorCode::kShapeMismatch,
          "autoencoder " + path.string() + " expects " + std::to_string(model.input_size) + " px inputs, config has " +
              std::to_string(config.image_size));
  return model;
}

std::unordered_map<std::string, Split> split_lookup(const DatasetManifest& manifest) {
  std::unordered_map<std::string, Split> out;
  for (const auto& r : manifest.records) out.emplace(r.sample_id, r.split);
  return out;
}

Eigen::MatrixXd to_matrix(std::span<const FeaturePoint> points) {
  require(!points.empty(), ErrorCode::kInvalidArgument, "no feature points");
  const auto k = static_cast<Eigen::Index>(points.front().values.size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(points.size()), k);
  for (std::size_t i = 0; i < points.size(); ++i) {
    require(static_cast<Eigen::Index>(points[i].values.size()) == k, ErrorCode::kShapeMismatch, "ragged feature rows");
    for (Eigen::Index j = 0; j < k; ++j) m(static_cast<Eigen::Index>(i), j) = points[i].values[static_cast<std::size_t>(j)];
  }
  return m;
}

struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x, bool enabled) {
    Standardizer s;
    s.mean = Eigen::RowVectorXd::Zero(x.cols());
    s.scale = Eigen::RowVectorXd::Ones(x.cols());
    if (!enabled) return s;
    s.mean = x.colwise().mean();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double var = (x.col(j).array() - s.mean(j)).square().sum() / std::max<double>(1.0, static_cast<double>(x.rows() - 1));
      if (var > 0.0) s.scale(j) = std::sqrt(var);
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean).array().rowwise() / scale.array();
  }
};

// Validation rows fit the OC-SVM; test rows are scored.
struct SplitFeatures {
  std::vector<FeaturePoint> fit;
  std::vector<FeaturePoint> test;
};

SplitFeatures split_features(const std::vector<FeaturePoint>& points, const DatasetManifest& manifest) {
  const auto lookup = split_lookup(manifest);
  SplitFeatures out;
  for (const auto& p : points) {
    const auto it = lookup.find(p.sample_id);
    require(it != lookup.end(), ErrorCode::kInvalidArgument, "feature row " + p.sample_id + " is not in the manifest");
    if (it->second == Split::kVal) {
      require(p.label == DefectKind::kOk, ErrorCode::kInvalidArgument, "NOK sample in the validation split");
      out.fit.push_back(p);
    } else if (it->second == Split::kTest) {
      out.test.push_back(p);
    }
  }
  require(!out.fit.empty(), ErrorCode::kInvalidArgument, "no validation rows to fit the OC-SVM on");
  require(!out.test.empty(), ErrorCode::kInvalidArgument, "no test rows to evaluate");
  return out;
}

void write_kv(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

std::map<std::string, std::string> read_kv(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

std::filesystem::path embed_summary_path(const ExperimentConfig& config) { return config.out_dir / "embed_pca_tsne.kv"; }

}  // namespace

DatasetManifest stage_synth(const ExperimentConfig& config, const Logger& log) {
  return in_stage("synth", [&] {
    SynthParams params = config.synth;
    params.seed = stage_seeds(config.seed).dataset;
    say(log, "synth: rendering " +
                 std::to_string(config.counts.train_ok + config.counts.val_ok + config.counts.test_ok +
                                config.counts.test_nok) +
                 " samples into " + config.dataset_dir.string());
    return synth_dataset(params, config.counts, config.nok_ratio, config.dataset_dir);
  });
}

TrainResult stage_train(const ExperimentConfig& config, const Logger& log) {
  return in_stage("train", [&] {
    config.validate();
    ensure_out_dir(config);
    const DatasetManifest manifest = load_manifest(config);
    const auto root = manifest_root(config);
    const auto train_images = load_split(manifest, root, Split::kTrain, config.image_size, config.crop_threshold);
    const auto val_images = load_split(manifest, root, Split::kVal, config.image_size, config.crop_threshold);
    for (const auto& li : train_images) {
      require(li.label == DefectKind::kOk, ErrorCode::kInvalidArgument, "training split must be OK-only");
    }
    const auto seeds = stage_seeds(config.seed);
    const Architecture arch = make_preset(config.preset, config.image_size);
    CaeModel model = init_model(arch, config.image_size, seeds.cae_init);
    TrainConfig tc = config.train;
    tc.seed = seeds.cae_train;
    say(log, "train: " + arch.name + " (" + std::to_string(arch.conv_count()) + " convs, " +
                 std::to_string(model.parameter_count()) + " parameters) on " + std::to_string(train_images.size()) +
                 " OK samples, " + std::to_string(tc.epochs) + " epochs");
    const Tensor4<float> train_t = to_tensor(train_images);
    const Tensor4<float> val_t = val_images.empty() ? Tensor4<float>() : to_tensor(val_images);
    TrainResult result = train(std::move(model), train_t, val_t, tc, [&](int epoch, double tl, double vl) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "train: epoch %3d  train %.6f  val %.6f", epoch, tl, vl);
      say(log, buf);
    });
    save_cae(result.model, cae_model_path(config));
    std::ofstream hist(config.out_dir / "train_history.csv", std::ios::binary | std::ios::trunc);
    hist << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < result.history.train_loss.size(); ++e) {
      hist << e + 1 << ',' << format_double(result.history.train_loss[e]) << ','
           << format_double(result.history.val_loss[e]) << '\n';
    }
    say(log, "train: best epoch " + std::to_string(result.history.best_epoch) + ", model written to " +
                 cae_model_path(config).string());
    return result;
  });
}

void stage_features(const ExperimentConfig& config, const Logger& log) {
  in_stage("features", [&] {
    config.validate();
    ensure_out_dir(config);
    const DatasetManifest manifest = load_manifest(config);
    const auto root = manifest_root(config);
    const CaeModel model = load_trained_model(config);
    if (config.mode == FeatureMode::kErrorMetrics) {
      std::vector<FeaturePoint> points;
      for (Split split : {Split::kVal, Split::kTest}) {
        const auto images = load_split(manifest, root, split, config.image_size, config.crop_threshold);
        for (const auto& e : build_error_features(model, images, config.ssim, config.train.batch_size)) {
          points.push_back(FeaturePoint{e.sample_id, e.label, {e.l2, e.ssim}});
        }
      }
      write_features_csv(points, features_path(config, FeatureMode::kErrorMetrics));
      say(log, "features: " + std::to_string(points.size()) + " (l2, ssim) points written");
      return;
    }
    std::vector<FeaturePoint> codes;
    for (Split split : {Split::kTrain, Split::kVal, Split::kTest}) {
      const auto images = load_split(manifest, root, split, config.image_size, config.crop_threshold);
      const auto bs = static_cast<std::size_t>(config.train.batch_size);
      for (std::size_t b = 0; b < images.size(); b += bs) {
        const std::size_t e = std::min(images.size(), b + bs);
        const Tensor4<float> code = encode(model, to_tensor(std::span(images).subspan(b, e - b)));
        const std::size_t per = code.shape().per_sample();
        for (std::size_t i = b; i < e; ++i) {
          const float* c = code.sample(static_cast<int>(i - b));
          codes.push_back(FeaturePoint{images[i].sample_id, images[i].label, std::vector<double>(c, c + per)});
        }
      }
    }
    write_features_csv(codes, codes_path(config));
    say(log, "features: " + std::to_string(codes.size()) + " codes of dimension " +
                 std::to_string(codes.front().values.size()) + " written");
    if (config.mode == FeatureMode::kRawEncoded) {
      const auto lookup = split_lookup(manifest);
      std::vector<FeaturePoint> eval_rows;
      for (const auto& c : codes) {
        if (lookup.at(c.sample_id) != Split::kTrain) eval_rows.push_back(c);
      }
      write_features_csv(eval_rows, features_path(config, FeatureMode::kRawEncoded));
    }
  });
}

void stage_embed(const ExperimentConfig& config, const Logger& log) {
  in_stage("embed", [&] {
    config.validate();
    const DatasetManifest manifest = load_manifest(config);
    require(std::filesystem::exists(codes_path(config)), ErrorCode::kIo,
            "no codes at " + codes_path(config).string() + " (run features with --mode pca_tsne first)");
    const auto codes = read_features_csv(codes_path(config));
    const auto lookup = split_lookup(manifest);
    std::vector<FeaturePoint> fit_rows;
    std::vector<FeaturePoint> embed_rows;
    for (const auto& c : codes) {
      const Split s = lookup.at(c.sample_id);
      if (s == Split::kTrain || s == Split::kVal) fit_rows.push_back(c);
      if (s == Split::kVal || s == Split::kTest) embed_rows.push_back(c);
    }
    const Eigen::MatrixXd fit_x = to_matrix(fit_rows);
    const Standardizer standardizer = Standardizer::fit(fit_x, config.standardize_features);
    const int k = std::min<int>({config.pca_dims, static_cast<int>(fit_x.cols()), static_cast<int>(fit_x.rows()) - 1});
    const PcaModel pca = pca_fit(standardizer.apply(fit_x), k);
    const Eigen::MatrixXd reduced = pca_transform(pca, standardizer.apply(to_matrix(embed_rows)));
    TsneConfig tc = config.tsne;
    tc.seed = stage_seeds(config.seed).tsne;
    say(log, "embed: PCA " + std::to_string(fit_x.cols()) + " -> " + std::to_string(k) + " dims (" +
                 format_double(pca.explained_variance_ratio().sum()) + " of variance), t-SNE on " +
                 std::to_string(embed_rows.size()) + " points");
    const TsneResult tsne = tsne_embed(reduced, tc);
    std::vector<FeaturePoint> points;
    for (std::size_t i = 0; i < embed_rows.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      points.push_back(FeaturePoint{embed_rows[i].sample_id, embed_rows[i].label,
                                    {tsne.embedding(r, 0), tsne.embedding(r, 1)}});
    }
    write_features_csv(points, features_path(config, FeatureMode::kPcaTsne));
    std::ostringstream kv;
    kv << "pca_dims=" << k << '\n'
       << "pca_explained_variance_ratio=" << format_double(pca.explained_variance_ratio().sum()) << '\n'
       << "tsne_kl=" << format_double(tsne.kl_divergence) << '\n'
       << "tsne_kl_after_exaggeration=" << format_double(tsne.kl_after_exaggeration) << '\n';
    write_kv(embed_summary_path(config), kv.str());
    say(log, "embed: final KL " + format_double(tsne.kl_divergence));
  });
}

OcSvmModel stage_fit_svm(const ExperimentConfig& config, const Logger& log) {
  return in_stage("fit-svm", [&] {
    config.validate();
    const DatasetManifest manifest = load_manifest(config);
    const auto path = features_path(config, config.mode);
    require(std::filesystem::exists(path), ErrorCode::kIo, "no features at " + path.string());
    const SplitFeatures sf = split_features(read_features_csv(path), manifest);
    const Eigen::MatrixXd fit_x = to_matrix(sf.fit);
    const Standardizer standardizer = Standardizer::fit(fit_x, config.standardize_features);
    const OcSvmModel model = ocsvm_fit(standardizer.apply(fit_x), config.ocsvm);
    save_ocsvm(model, ocsvm_path(config, config.mode));
    say(log, "fit-svm: " + std::to_string(model.alphas.size()) + " support vectors from " +
                 std::to_string(sf.fit.size()) + " validation OK points" + (model.converged ? "" : " (NOT converged)"));
    return model;
  });
}

EvaluationReport stage_evaluate(const ExperimentConfig& config, const Logger& log) {
  return in_stage("evaluate", [&] {
    config.validate();
    const DatasetManifest manifest = load_manifest(config);
    const auto fpath = features_path(config, config.mode);
    require(std::filesystem::exists(fpath), ErrorCode::kIo, "no features at " + fpath.string());
    const auto all_points = read_features_csv(fpath);
    const SplitFeatures sf = split_features(all_points, manifest);
    const OcSvmModel model = load_ocsvm(ocsvm_path(config, config.mode));
    const Eigen::MatrixXd fit_x = to_matrix(sf.fit);
    const Standardizer standardizer = Standardizer::fit(fit_x, config.standardize_features);
    const Eigen::MatrixXd test_x = standardizer.apply(to_matrix(sf.test));
    require(test_x.cols() == model.dim(), ErrorCode::kShapeMismatch, "OC-SVM dimension does not match the features");

    EvaluationReport report;
    report.mode = config.mode;
    report.preset = std::string(to_string(config.preset));
    report.seed = config.seed;
    report.n_fit = static_cast<int>(sf.fit.size());
    report.n_test = static_cast<int>(sf.test.size());
    report.feature_dim = static_cast<int>(test_x.cols());
    report.ocsvm_converged = model.converged;
    report.ocsvm_residual = model.kkt_residual;
    report.ocsvm_gamma = model.gamma;
    report.ocsvm_rho = model.rho;
    report.support_vectors = model.alphas.size();

    const std::vector<double> decisions = decision_rows(model, test_x);
    std::vector<double> scores(decisions.size());
    std::vector<int> labels(decisions.size());
    for (std::size_t i = 0; i < decisions.size(); ++i) {
      scores[i] = -decisions[i];
      labels[i] = sf.test[i].label == DefectKind::kOk ? 0 : 1;
      const bool outlier = predict_from_score(decisions[i]) == Prediction::kOutlier;
      if (labels[i] == 1) {
        (outlier ? report.confusion.tp : report.confusion.fn)++;
      } else {
        (outlier ? report.confusion.fp : report.confusion.tn)++;
      }
    }
    report.auc_overall = auc(scores, labels);
    for (DefectKind kind : kNokKinds) {
      std::vector<double> s;
      std::vector<int> l;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        if (sf.test[i].label == DefectKind::kOk || sf.test[i].label == kind) {
          s.push_back(scores[i]);
          l.push_back(sf.test[i].label == kind ? 1 : 0);
        }
      }
      if (std::count(l.begin(), l.end(), 1) > 0 && std::count(l.begin(), l.end(), 0) > 0) {
        report.auc_by_class[kind] = auc(s, l);
      }
    }

    // Class statistics on the unscaled features.
    std::vector<FeaturePoint> stat_points = sf.fit;
    stat_points.insert(stat_points.end(), sf.test.begin(), sf.test.end());
    for (DefectKind kind : kAllDefectKinds) {
      std::vector<const FeaturePoint*> members;
      for (const auto& p : stat_points) {
        if (p.label == kind) members.push_back(&p);
      }
      if (members.empty()) continue;
      ClassStats cs{kind, std::vector<double>(static_cast<std::size_t>(report.feature_dim), 0.0),
                    std::vector<double>(static_cast<std::size_t>(report.feature_dim), 0.0)};
      for (std::size_t j = 0; j < cs.mean.size(); ++j) {
        double sum = 0.0;
        for (const auto* p : members) sum += p->values[j];
        cs.mean[j] = sum / static_cast<double>(members.size());
        double ss = 0.0;
        for (const auto* p : members) ss += (p->values[j] - cs.mean[j]) * (p->values[j] - cs.mean[j]);
        cs.variance[j] = members.size() > 1 ? ss / static_cast<double>(members.size() - 1) : 0.0;
      }
      report.class_stats.push_back(std::move(cs));
    }

    if (config.mode == FeatureMode::kPcaTsne) {
      const auto kv = read_kv(embed_summary_path(config));
      if (const auto it = kv.find("tsne_kl"); it != kv.end()) report.tsne_kl = std::stod(it->second);
    }

    // Small nu x gamma sensitivity grid around the configured model.
    const Eigen::MatrixXd fit_scaled = standardizer.apply(fit_x);
    for (double nu : {0.05, 0.1, 0.2}) {
      for (double factor : {0.1, 1.0, 10.0}) {
        if (nu * static_cast<double>(fit_scaled.rows()) < 1.0) continue;
        OcSvmConfig gc = config.ocsvm;
        gc.nu = nu;
        gc.gamma = model.gamma * factor;
        const OcSvmModel gm = ocsvm_fit(fit_scaled, gc);
        const auto gd = decision_rows(gm, test_x);
        std::vector<double> gs(gd.size());
        std::transform(gd.begin(), gd.end(), gs.begin(), [](double d) { return -d; });
        report.grid.push_back(GridCell{nu, factor, auc(gs, labels)});
      }
    }

    const std::string mode_name(to_string(config.mode));
    const auto scores_file = config.out_dir / ("scores_" + mode_name + ".csv");
    {
      std::ofstream out(scores_file, std::ios::binary | std::ios::trunc);
      require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + scores_file.string());
      out << "sample_id,label,score\n";
      for (std::size_t i = 0; i < scores.size(); ++i) {
        out << sf.test[i].sample_id << ',' << to_string(sf.test[i].label) << ',' << format_double(scores[i]) << '\n';
      }
    }

    std::vector<FeaturePoint> plot = stat_points;
    ScatterOptions opts;
    if (config.mode == FeatureMode::kErrorMetrics) {
      opts = {"Reconstruction-error feature space", "L2 error", "SSIM"};
    } else if (config.mode == FeatureMode::kPcaTsne) {
      opts = {"PCA + t-SNE embedding of autoencoder codes", "t-SNE 1", "t-SNE 2"};
    } else {
      // Codes are plotted on their first two principal axes.
      const Eigen::MatrixXd all = to_matrix(plot);
      const PcaModel p2 = pca_fit(all, std::min<int>(2, static_cast<int>(std::min(all.cols(), all.rows() - 1))));
      const Eigen::MatrixXd proj = pca_transform(p2, all);
      for (std::size_t i = 0; i < plot.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        plot[i].values = {proj(r, 0), proj.cols() > 1 ? proj(r, 1) : 0.0};
      }
      opts = {"Autoencoder codes (first two principal axes)", "PC 1", "PC 2"};
    }
    const auto svg_file = config.out_dir / ("scatter_" + mode_name + ".svg");
    scatter_svg(plot, svg_file, opts);

    report.files["features"] = fpath.filename().string();
    report.files["scores"] = scores_file.filename().string();
    report.files["scatter"] = svg_file.filename().string();
    report.files["ocsvm_model"] = ocsvm_path(config, config.mode).filename().string();
    report.files["cae_model"] = (config.cae_model.empty() ? cae_model_path(config) : config.cae_model).filename().string();

    write_kv(config.out_dir / ("report_" + mode_name + ".kv"), report.to_kv());
    write_kv(config.out_dir / ("report_" + mode_name + ".txt"), report.to_text());
    char buf[96];
    std::snprintf(buf, sizeof buf, "evaluate: %s AUC %.4f", mode_name.c_str(), report.auc_overall);
    say(log, buf);
    return report;
  });
}

EvaluationReport run_experiment(const ExperimentConfig& config, const Logger& log) {
  config.validate();
  ExperimentConfig cfg = config;
  if (cfg.cae_model.empty()) {
    stage_train(cfg, log);
    cfg.cae_model = cae_model_path(cfg);
  }
  stage_features(cfg, log);
  if (cfg.mode == FeatureMode::kPcaTsne) stage_embed(cfg, log);
  stage_fit_svm(cfg, log);
  return stage_evaluate(cfg, log);
}

std::vector<EvaluationReport> run_all(const ExperimentConfig& config, std::span<const FeatureMode> modes,
                                      const Logger& log) {
  config.validate();
  stage_synth(config, log);
  ExperimentConfig cfg = config;
  if (cfg.cae_model.empty()) {
    stage_train(cfg, log);
    cfg.cae_model = cae_model_path(cfg);
  }
  std::vector<EvaluationReport> reports;
  for (FeatureMode mode : modes) {
    cfg.mode = mode;
    reports.push_back(run_experiment(cfg, log));
  }
  std::ostringstream kv;
  std::ostringstream text;
  text << "Feature-space comparison (" << to_string(config.preset) << ", seed " << config.seed << ")\n";
  for (const auto& r : reports) {
    kv << "auc." << to_string(r.mode) << '=' << format_double(r.auc_overall) << '\n';
    char buf[96];
    std::snprintf(buf, sizeof buf, "  %-14s AUC %.4f\n", std::string(to_string(r.mode)).c_str(), r.auc_overall);
    text << buf;
  }
  ensure_out_dir(config);
  write_kv(config.out_dir / "summary.kv", kv.str());
  write_kv(config.out_dir / "summary.txt", text.str());
  return reports;
}

}  // namespace cad
