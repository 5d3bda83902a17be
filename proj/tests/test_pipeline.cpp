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

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cad/error.hpp"
#include "cad/pipeline.hpp"
#include "test_util.hpp"

using namespace cad;

namespace {

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentConfig tiny_config(const std::filesystem::path& root) {
  ExperimentConfig c;
  c.dataset_dir = root / "data";
  c.out_dir = root / "out";
  c.set("image_size", "16");
  c.set("synth.image_size", "32");
  c.set("preset", "BAE2");
  c.set("epochs", "2");
  c.set("batch_size", "4");
  c.set("synth.train_ok", "8");
  c.set("synth.val_ok", "20");
  c.set("synth.test_ok", "6");
  c.set("synth.test_nok", "6");
  c.set("tsne.perplexity", "5");
  c.set("tsne.iterations", "300");
  c.set("pca_dims", "10");
  return c;
}

}  // namespace

TEST_CASE("feature mode names") {
  for (FeatureMode m : kAllFeatureModes) CHECK(parse_feature_mode(to_string(m)) == m);
  CHECK(to_string(FeatureMode::kPcaTsne) == "pca_tsne");
  CHECK_FALSE(parse_feature_mode("tsne").has_value());
}

TEST_CASE("config keys round-trip through get and set") {
  ExperimentConfig c;
  for (const std::string& key : config_keys()) {
    const std::string value = c.get(key);
    CAPTURE(key);
    CHECK_NOTHROW(c.set(key, value));
    CHECK(c.get(key) == value);
  }
  c.set("ocsvm.gamma", "scale");
  CHECK_FALSE(c.ocsvm.gamma.has_value());
  c.set("ocsvm.gamma", "0.25");
  CHECK(c.ocsvm.gamma == 0.25);
  c.set("synth.nok_ratio", "2:1:1");
  CHECK(c.nok_ratio[0] == 2.0);
  c.set("mode", "raw_encoded");
  CHECK(c.mode == FeatureMode::kRawEncoded);
  CHECK_THROWS_AS(c.set("no_such_key", "1"), Error);
  CHECK_THROWS_AS(c.set("epochs", "ten"), Error);
  CHECK_THROWS_AS(c.set("preset", "VGG"), Error);
  CHECK_THROWS_AS(c.set("synth.nok_ratio", "1:1"), Error);
}

TEST_CASE("config files report the failing line") {
  TempDir dir;
  const auto p = dir.path() / "c.cfg";
  {
    std::ofstream out(p);
    out << "# comment\nseed = 7\n\nmode = pca_tsne  # trailing\n";
  }
  ExperimentConfig c;
  c.load_file(p);
  CHECK(c.seed == 7);
  CHECK(c.mode == FeatureMode::kPcaTsne);
  {
    std::ofstream out(p);
    out << "seed = 7\nbogus line\n";
  }
  try {
    c.load_file(p);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  CHECK_THROWS_AS(c.load_file(dir.path() / "missing.cfg"), Error);
}

TEST_CASE("config validation") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  c.image_size = 48;
  CHECK_THROWS_AS(c.validate(), Error);
  const ExperimentConfig full = full_scale_config();
  CHECK(full.image_size == 256);
  CHECK(full.counts.train_ok == 1000);
  CHECK(full.counts.val_ok == 2000);
}

TEST_CASE("stage seeds are distinct and stable") {
  const StageSeeds a = stage_seeds(42);
  CHECK(a.dataset == 42);
  CHECK(a.cae_init != a.cae_train);
  CHECK(a.cae_train != a.tsne);
  CHECK(stage_seeds(42).tsne == a.tsne);
  CHECK(stage_seeds(43).tsne != a.tsne);
}

TEST_CASE("stages run end to end on a tiny dataset") {
  TempDir dir;
  ExperimentConfig c = tiny_config(dir.path());
  const auto reports = run_all(c, kAllFeatureModes);
  REQUIRE(reports.size() == 3);
  for (const EvaluationReport& r : reports) {
    CAPTURE(to_string(r.mode));
    CHECK(r.auc_overall >= 0.0);
    CHECK(r.auc_overall <= 1.0);
    CHECK(r.n_fit == 20);
    CHECK(r.n_test == 12);
    CHECK(r.confusion.total() == 12);
    CHECK(r.grid.size() == 9);
    CHECK(r.auc_by_class.size() == 3);
    const std::string name(to_string(r.mode));
    CHECK(std::filesystem::exists(c.out_dir / ("scores_" + name + ".csv")));
    CHECK(std::filesystem::exists(c.out_dir / ("scatter_" + name + ".svg")));
    CHECK(std::filesystem::exists(c.out_dir / ("report_" + name + ".kv")));
  }
  CHECK(reports[0].feature_dim == 2);
  CHECK(reports[1].feature_dim == 2);
  CHECK(reports[1].tsne_kl.has_value());
  CHECK(std::filesystem::exists(cae_model_path(c)));
  CHECK(std::filesystem::exists(c.out_dir / "train_history.csv"));
  const std::string summary = file_bytes(c.out_dir / "summary.kv");
  CHECK(summary.find("auc.error_metrics=") != std::string::npos);

  // The scores file reproduces the reported AUC.
  std::ifstream in(c.out_dir / "scores_error_metrics.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "sample_id,label,score");
  std::vector<double> s;
  std::vector<int> y;
  while (std::getline(in, line)) {
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    y.push_back(line.substr(a + 1, b - a - 1) == "OK" ? 0 : 1);
    s.push_back(std::stod(line.substr(b + 1)));
  }
  CHECK(s.size() == 12);
  CHECK(auc(s, y) == reports[0].auc_overall);

  // Re-running the later stages from the saved model reproduces the files.
  const std::string features = file_bytes(features_path(c, FeatureMode::kPcaTsne));
  c.mode = FeatureMode::kPcaTsne;
  c.cae_model = cae_model_path(c);
  const EvaluationReport again = run_experiment(c);
  CHECK(file_bytes(features_path(c, FeatureMode::kPcaTsne)) == features);
  CHECK(again.auc_overall == reports[1].auc_overall);
}

TEST_CASE("stage errors name the stage") {
  TempDir dir;
  ExperimentConfig c = tiny_config(dir.path());
  try {
    stage_features(c);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).rfind("[features]", 0) == 0);
  }
}
