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

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace cad {

/// Rows of `components` are orthonormal principal axes, sorted by
/// decreasing explained variance (sample covariance, divisor n - 1). Each
/// axis is signed so that its largest-magnitude entry is positive.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // k x d
  Eigen::VectorXd explained_variance;
  double total_variance = 0.0;

  int input_dim() const noexcept { return static_cast<int>(mean.size()); }
  int output_dim() const noexcept { return static_cast<int>(components.rows()); }
  Eigen::VectorXd explained_variance_ratio() const { return explained_variance / total_variance; }
};

/// Eigendecomposes the d x d covariance when n - 1 >= d, otherwise the
/// n x n Gram matrix. Requires n >= 2 and 1 <= k <= min(n - 1, d); throws
/// kDegenerateData when every row is identical.
PcaModel pca_fit(const Eigen::MatrixXd& x, int k);

/// (X - mean) * components^T
Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& x);
/// Y * components + mean
Eigen::MatrixXd pca_inverse_transform(const PcaModel& model, const Eigen::MatrixXd& y);

/// Column-wise z-scoring; constant columns are only centred.
Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& x);

struct SigmaCalibration {
  double sigma = 0.0;
  double beta = 0.0;  // 1 / (2 sigma^2)
  double perplexity = 0.0;
  int steps = 0;
  std::vector<double> probabilities;
};

/// Finds the Gaussian bandwidth whose conditional distribution over the
/// given squared distances has perplexity 2^H equal to the target.
/// Bisection on log2(beta * mean distance) over [-60, 60], at most 100
/// steps, stopping once |2^H - target| <= 1e-10 * target. Throws
/// kDegenerateData when no distance is positive.
SigmaCalibration calibrate_sigma(std::span<const double> sq_distances, double target_perplexity);

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  double min_gain = 0.01;
  std::uint64_t seed = 42;

  void validate(int n) const;
};

struct TsneResult {
  Eigen::MatrixXd embedding;  // n x 2
  Eigen::MatrixXd p;          // symmetrized joint affinities, sums to 1
  std::vector<double> row_perplexity;
  double kl_divergence = 0.0;
  double kl_after_exaggeration = 0.0;
};

/// Exact O(n^2) t-SNE to two dimensions. Initial points are N(0, 1e-4^2)
/// from the seed; updates use momentum with per-coordinate gains (+0.2 on
/// sign change, *0.8 otherwise, floored at min_gain) and the embedding is
/// re-centred after every step. Exact duplicate rows receive a seeded
/// 1e-12 jitter first. Identical input and seed give a bit-identical result.
TsneResult tsne_embed(const Eigen::MatrixXd& x, const TsneConfig& config);

/// KL(P || Q) for an embedding under the Student-t kernel.
double tsne_kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& embedding);

}  // namespace cad
