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

#include <cmath>

#include "cad/dimred.hpp"
#include "cad/error.hpp"
#include "cad/rng.hpp"
#include "oracles.hpp"

using namespace cad;

namespace {

Eigen::MatrixXd random_matrix(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = rng.normal() * (1.0 + j);
  }
  return x;
}

// Flip so the largest-magnitude entry is positive.
Eigen::VectorXd canonical(Eigen::VectorXd v) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < v.size(); ++j) {
    if (std::abs(v(j)) > std::abs(v(best))) best = j;
  }
  return v(best) < 0 ? Eigen::VectorXd(-v) : v;
}

Eigen::MatrixXd clusters(int per_cluster, std::uint64_t seed, std::vector<int>* labels) {
  Rng rng(seed);
  const double centres[3][5] = {{0, 0, 0, 0, 0}, {12, 0, 0, 4, 0}, {0, 12, 5, 0, 0}};
  Eigen::MatrixXd x(3 * per_cluster, 5);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < per_cluster; ++i) {
      for (int j = 0; j < 5; ++j) x(c * per_cluster + i, j) = centres[c][j] + rng.normal();
      labels->push_back(c);
    }
  }
  return x;
}

}  // namespace

TEST_CASE("PCA on collinear points") {
  Eigen::MatrixXd x(3, 2);
  x << -1, -1, 0, 0, 1, 1;
  const PcaModel m = pca_fit(x, 1);
  CHECK(m.components(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(m.components(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(m.explained_variance_ratio()(0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("PCA matches a Jacobi eigendecomposition oracle on 20x6 data") {
  const Eigen::MatrixXd x = random_matrix(20, 6, 42);
  const PcaModel m = pca_fit(x, 6);
  const auto [values, vectors] = oracle::jacobi_eigen(oracle::covariance(x));
  for (int i = 0; i < 6; ++i) {
    CHECK(std::abs(m.explained_variance(i) - values(i)) <= 1e-9 * std::max(1.0, values(i)));
    const Eigen::VectorXd expected = canonical(vectors.col(i));
    const Eigen::VectorXd got = m.components.row(i).transpose();
    CHECK((got - expected).cwiseAbs().maxCoeff() <= 1e-9);
  }
  const Eigen::MatrixXd gram = m.components * m.components.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-8);
  for (int i = 1; i < 6; ++i) CHECK(m.explained_variance(i) <= m.explained_variance(i - 1));
}

TEST_CASE("PCA through the Gram matrix when n - 1 < d") {
  const Eigen::MatrixXd x = random_matrix(6, 15, 7);
  const PcaModel m = pca_fit(x, 5);
  const auto [values, vectors] = oracle::jacobi_eigen(oracle::covariance(x));
  for (int i = 0; i < 5; ++i) {
    CHECK(std::abs(m.explained_variance(i) - values(i)) <= 1e-9 * std::max(1.0, values(i)));
    const Eigen::VectorXd expected = canonical(vectors.col(i));
    CHECK((m.components.row(i).transpose() - expected).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("PCA transform properties") {
  const Eigen::MatrixXd x = random_matrix(20, 6, 3);
  const PcaModel full = pca_fit(x, 6);
  CHECK((pca_inverse_transform(full, pca_transform(full, x)) - x).cwiseAbs().maxCoeff() <= 1e-8);

  const PcaModel m = pca_fit(x, 3);
  const Eigen::MatrixXd mean_row = m.mean.transpose();
  CHECK(pca_transform(m, mean_row).cwiseAbs().maxCoeff() <= 1e-12);

  const Eigen::MatrixXd once = pca_inverse_transform(m, pca_transform(m, x));
  const Eigen::MatrixXd twice = pca_inverse_transform(m, pca_transform(m, once));
  CHECK((once - twice).cwiseAbs().maxCoeff() <= 1e-10);

  const Eigen::MatrixXd y = pca_transform(m, x);
  for (int j = 0; j < 3; ++j) {
    const double mean = y.col(j).mean();
    const double var = (y.col(j).array() - mean).square().sum() / 19.0;
    CHECK(std::abs(var - m.explained_variance(j)) <= 1e-9 * std::max(1.0, var));
  }
  CHECK(m.explained_variance.sum() <= m.total_variance + 1e-12);
}

TEST_CASE("PCA is translation invariant") {
  const Eigen::MatrixXd x = random_matrix(15, 4, 11);
  Eigen::RowVectorXd shift(4);
  shift << 3.0, -7.0, 100.0, 0.5;
  const Eigen::MatrixXd shifted = x.rowwise() + shift;
  const Eigen::MatrixXd a = pca_transform(pca_fit(x, 3), x);
  const Eigen::MatrixXd b = pca_transform(pca_fit(shifted, 3), shifted);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("PCA errors") {
  const Eigen::MatrixXd x = random_matrix(5, 3, 1);
  CHECK_THROWS_AS(pca_fit(x, 0), Error);
  CHECK_THROWS_AS(pca_fit(x, 4), Error);
  CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Ones(5, 3), 1), Error);
  CHECK_THROWS_AS(pca_fit(x.topRows(1), 1), Error);
  const PcaModel m = pca_fit(x, 2);
  CHECK_THROWS_AS(pca_transform(m, Eigen::MatrixXd::Zero(2, 4)), Error);
}

TEST_CASE("sigma calibration on symmetric rows") {
  const std::vector<double> two = {2.5, 2.5};
  const SigmaCalibration a = calibrate_sigma(two, 2.0);
  CHECK(a.perplexity == 2.0);
  CHECK(a.probabilities[0] == 0.5);
  CHECK(a.probabilities[1] == 0.5);

  const std::vector<double> three = {1.0, 1.0, 1.0};
  const SigmaCalibration b = calibrate_sigma(three, 3.0);
  CHECK(std::abs(b.perplexity - 3.0) < 1e-5);
  for (double p : b.probabilities) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("sigma calibration matches a grid-scan oracle") {
  const std::vector<double> d = {1.0, 4.0};
  const SigmaCalibration c = calibrate_sigma(d, 1.5);
  CHECK(std::abs(c.perplexity - 1.5) < 1e-5);
  CHECK(c.steps <= 100);
  const double coarse = oracle::sigma_by_grid_scan(d, 1.5, 0.05, 10.0, 1e-3);
  const double fine = oracle::sigma_by_grid_scan(d, 1.5, coarse - 2e-3, coarse + 2e-3, 1e-6);
  CHECK(std::abs(c.sigma - fine) < 1e-4);
  CHECK(oracle::perplexity_at(d, c.sigma) == doctest::Approx(1.5).epsilon(1e-5));
}

TEST_CASE("sigma calibration rejects all-zero distances") {
  const std::vector<double> zeros = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(calibrate_sigma(zeros, 2.0), Error);
}

TEST_CASE("t-SNE affinities, perplexities and determinism") {
  std::vector<int> labels;
  const Eigen::MatrixXd x = clusters(20, 5, &labels);
  TsneConfig cfg;
  cfg.perplexity = 10.0;
  cfg.seed = 9;
  const TsneResult a = tsne_embed(x, cfg);
  const TsneResult b = tsne_embed(x, cfg);
  CHECK(a.embedding == b.embedding);
  CHECK(a.kl_divergence == b.kl_divergence);
  CHECK(a.embedding.rows() == 60);
  CHECK(a.embedding.cols() == 2);
  CHECK(a.embedding.allFinite());

  CHECK(std::abs(a.p.sum() - 1.0) <= 1e-12);
  CHECK((a.p - a.p.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.p.minCoeff() >= 0.0);
  for (double perp : a.row_perplexity) CHECK(std::abs(perp - 10.0) < 1e-5);

  CHECK(a.kl_divergence <= a.kl_after_exaggeration);
  CHECK(a.kl_divergence == doctest::Approx(tsne_kl_divergence(a.p, a.embedding)).epsilon(1e-12));
  CHECK(oracle::silhouette(a.embedding, labels) > 0.5);

  TsneConfig other = cfg;
  other.seed = 10;
  CHECK(tsne_embed(x, other).embedding != a.embedding);
}

TEST_CASE("t-SNE handles duplicate rows and validates its config") {
  Eigen::MatrixXd x = random_matrix(12, 3, 2);
  x.row(3) = x.row(4);
  TsneConfig cfg;
  cfg.perplexity = 3.0;
  cfg.iterations = 300;
  const TsneResult r = tsne_embed(x, cfg);
  CHECK(r.embedding.allFinite());

  cfg.perplexity = 5.0;  // needs perplexity < (n - 1) / 3
  CHECK_THROWS_AS(tsne_embed(x, cfg), Error);
  cfg.perplexity = 3.0;
  cfg.iterations = 100;
  CHECK_THROWS_AS(tsne_embed(x, cfg), Error);
  cfg.iterations = 300;
  CHECK_THROWS_AS(tsne_embed(x.topRows(3), cfg), Error);
}

TEST_CASE("standardize_columns gives zero mean and unit variance") {
  const Eigen::MatrixXd x = random_matrix(30, 4, 8);
  const Eigen::MatrixXd z = standardize_columns(x);
  for (int j = 0; j < 4; ++j) {
    CHECK(std::abs(z.col(j).mean()) < 1e-12);
    const double var = z.col(j).squaredNorm() / 29.0;
    CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
  }
}
