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

// Command-line front end over the C API.
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cad/cad.h"

namespace {

struct Options {
  std::string config_file;
  std::string seed;
  std::string out_dir;
  std::string dataset_dir;
  std::string mode;
  std::string preset;
  std::vector<std::string> overrides;
  bool full_scale = false;
  bool quiet = false;
};

void print_line(const char* line, void* /*user*/) { std::fprintf(stderr, "%s\n", line); }

std::string report_string(const cad_report* report, size_t index,
                          cad_status (*getter)(const cad_report*, size_t, char*, size_t, size_t*)) {
  size_t needed = 0;
  if (getter(report, index, nullptr, 0, &needed) != CAD_OK) return {};
  std::string text(needed, '\0');
  getter(report, index, text.data(), text.size(), &needed);
  text.resize(needed - 1);
  return text;
}

int fail_with(const std::string& context, cad_status status) {
  std::fprintf(stderr, "error: %s: %s (%s)\n", context.c_str(), cad_last_error(), cad_status_name(status));
  return static_cast<int>(status) == 0 ? 1 : static_cast<int>(status);
}

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.config_file, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", opt.seed, "master seed (u64)");
  cmd->add_option("--out", opt.out_dir, "output directory");
  cmd->add_option("--dataset", opt.dataset_dir, "dataset directory holding manifest.csv");
  cmd->add_option("--mode", opt.mode, "error_metrics | pca_tsne | raw_encoded");
  cmd->add_option("--preset", opt.preset, "bae1 | bae2 | mvtec");
  cmd->add_option("--set", opt.overrides, "extra config override key=value (repeatable)");
  cmd->add_flag("--full-scale", opt.full_scale, "start from the 256 px, 1000/2000/200+200 template");
  cmd->add_flag("-q,--quiet", opt.quiet, "suppress progress lines");
}

// Builds the config: template, then file, then flags.
int build_config(const Options& opt, bool mode_is_list, cad_config** out) {
  cad_status st = opt.full_scale ? cad_config_new_full_scale(out) : cad_config_new(out);
  if (st != CAD_OK) return fail_with("config", st);
  cad_config* cfg = *out;
  if (!opt.config_file.empty() && (st = cad_config_load(cfg, opt.config_file.c_str())) != CAD_OK) {
    return fail_with("config", st);
  }
  std::vector<std::pair<std::string, std::string>> sets;
  if (!opt.seed.empty()) sets.emplace_back("seed", opt.seed);
  if (!opt.out_dir.empty()) sets.emplace_back("out_dir", opt.out_dir);
  if (!opt.dataset_dir.empty()) sets.emplace_back("dataset_dir", opt.dataset_dir);
  if (!opt.preset.empty()) sets.emplace_back("preset", opt.preset);
  if (!opt.mode.empty() && !mode_is_list) sets.emplace_back("mode", opt.mode);
  for (const auto& o : opt.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: config: --set expects key=value, got '%s'\n", o.c_str());
      return 2;
    }
    sets.emplace_back(o.substr(0, eq), o.substr(eq + 1));
  }
  for (const auto& [key, value] : sets) {
    if ((st = cad_config_set(cfg, key.c_str(), value.c_str())) != CAD_OK) return fail_with("config", st);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reconstruction-error anomaly detection on synthetic ring biscuits"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cad_version()));

  Options opt;
  bool list_keys = false;
  struct Stage {
    const char* name;
    const char* help;
  };
  const std::vector<Stage> stages = {
      {"synth", "render the synthetic dataset and its manifest"},
      {"train", "train the autoencoder on the OK training split"},
      {"features", "build the feature space of --mode"},
      {"embed", "PCA + t-SNE over the encoded codes (pca_tsne)"},
      {"fit-svm", "fit the one-class SVM on validation OK features"},
      {"evaluate", "score the test split and write the report"},
  };
  for (const auto& s : stages) add_common(app.add_subcommand(s.name, s.help), opt);
  CLI::App* run_all = app.add_subcommand("run-all", "synth, train and every requested mode end to end");
  add_common(run_all, opt);
  CLI::App* keys = app.add_subcommand("config-keys", "list every config key with its default");
  keys->add_flag("--values", list_keys, "also print defaults");

  CLI11_PARSE(app, argc, argv);

  CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();

  if (name == "config-keys") {
    cad_config* cfg = nullptr;
    if (cad_config_new(&cfg) != CAD_OK) return fail_with("config", CAD_ERR_INTERNAL);
    for (size_t i = 0; i < cad_config_key_count(); ++i) {
      const char* key = cad_config_key(i);
      if (!list_keys) {
        std::printf("%s\n", key);
        continue;
      }
      char buf[256];
      size_t needed = 0;
      cad_config_get(cfg, key, buf, sizeof buf, &needed);
      std::printf("%s = %s\n", key, buf);
    }
    cad_config_free(cfg);
    return 0;
  }

  cad_config* cfg = nullptr;
  const bool is_run_all = name == "run-all";
  if (const int rc = build_config(opt, is_run_all, &cfg); rc != 0) {
    cad_config_free(cfg);
    return rc;
  }
  cad_log_fn log = opt.quiet ? nullptr : print_line;

  cad_report* report = nullptr;
  cad_status st = CAD_OK;
  if (is_run_all) {
    const std::string modes = opt.mode.empty() ? "all" : opt.mode;
    st = cad_run_all(cfg, modes.c_str(), log, nullptr, &report);
  } else {
    st = cad_run_stage(cfg, name.c_str(), log, nullptr, &report);
  }
  cad_config_free(cfg);
  if (st != CAD_OK) return fail_with(name, st);

  for (size_t i = 0; i < cad_report_count(report); ++i) {
    std::cout << report_string(report, i, cad_report_text) << '\n';
  }
  cad_report_free(report);
  return 0;
}
