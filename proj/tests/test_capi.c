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

/* Exercises the C interface from plain C. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "cad/cad.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

#define EXPECT_OK(call)                                                                        \
  do {                                                                                         \
    cad_status st_ = (call);                                                                   \
    if (st_ != CAD_OK) {                                                                       \
      fprintf(stderr, "%s:%d: %s -> %s: %s\n", __FILE__, __LINE__, #call, cad_status_name(st_), \
              cad_last_error());                                                               \
      ++failures;                                                                              \
    }                                                                                          \
  } while (0)

static void count_lines(const char* line, void* user) {
  (void)line;
  ++*(int*)user;
}

static void test_images(const char* dir) {
  double px[12];
  for (int i = 0; i < 12; ++i) px[i] = i / 11.0;
  cad_image* img = NULL;
  EXPECT_OK(cad_image_new(2, 2, 3, px, &img));
  int h = 0, w = 0, c = 0;
  EXPECT_OK(cad_image_shape(img, &h, &w, &c));
  EXPECT(h == 2 && w == 2 && c == 3);

  char path[512];
  snprintf(path, sizeof path, "%s/capi.ppm", dir);
  EXPECT_OK(cad_image_save(img, path));
  cad_image* back = NULL;
  EXPECT_OK(cad_image_load(path, &back));
  double got[12];
  EXPECT_OK(cad_image_pixels(back, got, 12));
  for (int i = 0; i < 12; ++i) EXPECT(fabs(got[i] - px[i]) <= 0.5 / 255.0 + 1e-12);
  EXPECT(cad_image_pixels(back, got, 5) == CAD_ERR_INVALID_ARGUMENT);

  double l2 = -1.0, s = 0.0;
  EXPECT_OK(cad_l2_error(img, img, &l2));
  EXPECT(l2 == 0.0);
  cad_image* gray = NULL;
  EXPECT_OK(cad_image_grayscale(img, &gray));
  EXPECT_OK(cad_image_shape(gray, &h, &w, &c));
  EXPECT(c == 1);
  EXPECT(cad_ssim(img, img, &s) == CAD_ERR_SHAPE_MISMATCH); /* smaller than the window */

  cad_image* sample = NULL;
  EXPECT_OK(cad_synth_sample("COLOR_DEFECT", 7, 32, &sample));
  EXPECT_OK(cad_ssim(sample, sample, &s));
  EXPECT(s == 1.0);
  EXPECT(cad_synth_sample("NOK", 7, 32, &sample) == CAD_ERR_INVALID_ARGUMENT);

  cad_image* bad = NULL;
  snprintf(path, sizeof path, "%s/missing.ppm", dir);
  EXPECT(cad_image_load(path, &bad) == CAD_ERR_IO);
  EXPECT(bad == NULL);
  EXPECT(strlen(cad_last_error()) > 0);

  cad_image_free(img);
  cad_image_free(back);
  cad_image_free(gray);
  cad_image_free(sample);
  cad_image_free(NULL);
}

static void test_auc(void) {
  const double scores[4] = {1, 2, 3, 4};
  const int labels[4] = {0, 1, 0, 1};
  double a = 0.0;
  EXPECT_OK(cad_auc(scores, labels, 4, &a));
  EXPECT(a == 0.75);
  const int one_class[4] = {1, 1, 1, 1};
  EXPECT(cad_auc(scores, one_class, 4, &a) == CAD_ERR_INVALID_ARGUMENT);
}

static void test_models(const char* dir) {
  cad_cae* cae = NULL;
  EXPECT_OK(cad_cae_init("BAE2", 16, 3, &cae));
  int size = 0;
  size_t code = 0, params = 0;
  EXPECT_OK(cad_cae_info(cae, &size, &code, &params));
  EXPECT(size == 16 && code > 0 && params > 0);
  char path[512];
  snprintf(path, sizeof path, "%s/capi.caem", dir);
  EXPECT_OK(cad_cae_save(cae, path));
  cad_cae* loaded = NULL;
  EXPECT_OK(cad_cae_load(path, &loaded));

  cad_image* sample = NULL;
  EXPECT_OK(cad_synth_sample("OK", 1, 16, &sample));
  double* c1 = malloc(code * sizeof *c1);
  double* c2 = malloc(code * sizeof *c2);
  EXPECT_OK(cad_cae_encode(cae, sample, c1, code));
  EXPECT_OK(cad_cae_encode(loaded, sample, c2, code));
  EXPECT(memcmp(c1, c2, code * sizeof *c1) == 0);
  cad_image* recon = NULL;
  EXPECT_OK(cad_cae_reconstruct(cae, sample, &recon));
  free(c1);
  free(c2);
  EXPECT(cad_cae_init("VGG", 16, 3, &cae) == CAD_ERR_INVALID_ARGUMENT);
  cad_image_free(sample);
  cad_image_free(recon);
  cad_cae_free(cae);
  cad_cae_free(loaded);

  double x[40];
  for (int i = 0; i < 40; ++i) x[i] = sin(i * 1.7);
  cad_ocsvm* svm = NULL;
  EXPECT_OK(cad_ocsvm_fit(x, 20, 2, 0.2, 0.0, &svm));
  size_t dim = 0, svs = 0;
  double rho = 0.0, gamma = 0.0, d1 = 0.0, d2 = 0.0;
  int converged = 0;
  EXPECT_OK(cad_ocsvm_info(svm, &dim, &svs, &rho, &gamma, &converged));
  EXPECT(dim == 2 && svs >= 4 && converged == 1 && gamma > 0.0);
  snprintf(path, sizeof path, "%s/capi.ocsv", dir);
  EXPECT_OK(cad_ocsvm_save(svm, path));
  cad_ocsvm* svm2 = NULL;
  EXPECT_OK(cad_ocsvm_load(path, &svm2));
  EXPECT_OK(cad_ocsvm_decision(svm, x, 2, &d1));
  EXPECT_OK(cad_ocsvm_decision(svm2, x, 2, &d2));
  EXPECT(d1 == d2);
  EXPECT(cad_ocsvm_decision(svm, x, 3, &d1) == CAD_ERR_SHAPE_MISMATCH);
  EXPECT(cad_ocsvm_fit(x, 20, 2, 0.01, 0.0, &svm2) == CAD_ERR_INFEASIBLE);
  cad_ocsvm_free(svm);
  cad_ocsvm_free(svm2);
}

static void test_config_and_pipeline(const char* dir) {
  cad_config* cfg = NULL;
  EXPECT_OK(cad_config_new(&cfg));
  EXPECT(cad_config_key_count() > 10);
  EXPECT(cad_config_key(cad_config_key_count()) == NULL);
  char buf[64];
  size_t needed = 0;
  EXPECT_OK(cad_config_get(cfg, "seed", buf, sizeof buf, &needed));
  EXPECT(strcmp(buf, "42") == 0 && needed == 3);
  EXPECT_OK(cad_config_get(cfg, "preset", buf, 2, &needed));
  EXPECT(strcmp(buf, "m") == 0 && needed == 6);
  EXPECT(cad_config_set(cfg, "nope", "1") == CAD_ERR_INVALID_ARGUMENT);

  char data[512], out[512];
  snprintf(data, sizeof data, "%s/data", dir);
  snprintf(out, sizeof out, "%s/out", dir);
  const char* settings[][2] = {{"dataset_dir", data}, {"out_dir", out},          {"image_size", "16"},
                               {"synth.image_size", "32"}, {"preset", "BAE2"}, {"epochs", "1"},
                               {"synth.train_ok", "8"},   {"synth.val_ok", "20"}, {"synth.test_ok", "6"},
                               {"synth.test_nok", "6"},   {"tsne.perplexity", "5"}, {"tsne.iterations", "250"}};
  for (size_t i = 0; i < sizeof settings / sizeof settings[0]; ++i) {
    EXPECT_OK(cad_config_set(cfg, settings[i][0], settings[i][1]));
  }
  EXPECT(cad_run_stage(cfg, "features", NULL, NULL, NULL) == CAD_ERR_IO);
  EXPECT(strncmp(cad_last_error(), "[features]", 10) == 0);
  EXPECT(cad_run_stage(cfg, "dance", NULL, NULL, NULL) == CAD_ERR_INVALID_ARGUMENT);

  int lines = 0;
  cad_report* report = NULL;
  EXPECT_OK(cad_run_all(cfg, "error_metrics,raw_encoded", count_lines, &lines, &report));
  EXPECT(lines > 0);
  EXPECT(cad_report_count(report) == 2);
  double a = -1.0;
  EXPECT_OK(cad_report_auc(report, 1, &a));
  EXPECT(a >= 0.0 && a <= 1.0);
  EXPECT_OK(cad_report_mode(report, 1, buf, sizeof buf, &needed));
  EXPECT(strcmp(buf, "raw_encoded") == 0);
  EXPECT_OK(cad_report_kv(report, 0, NULL, 0, &needed));
  char* kv = malloc(needed);
  EXPECT_OK(cad_report_kv(report, 0, kv, needed, &needed));
  EXPECT(strstr(kv, "auc_overall=") != NULL);
  free(kv);
  EXPECT(cad_report_auc(report, 2, &a) == CAD_ERR_INVALID_ARGUMENT);
  cad_report_free(report);

  EXPECT_OK(cad_run_stage(cfg, "evaluate", NULL, NULL, &report));
  EXPECT(cad_report_count(report) == 1);
  cad_report_free(report);
  cad_config_free(cfg);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    fprintf(stderr, "usage: %s SCRATCH_DIR\n", argv[0]);
    return 2;
  }
  EXPECT(strcmp(cad_version(), "1.0.0") == 0);
  EXPECT(strcmp(cad_status_name(CAD_ERR_BAD_MAGIC), "bad_magic") == 0);
  test_images(argv[1]);
  test_auc();
  test_models(argv[1]);
  test_config_and_pipeline(argv[1]);
  if (failures) {
    fprintf(stderr, "%d C API check(s) failed\n", failures);
    return 1;
  }
  printf("C API checks passed\n");
  return 0;
}
