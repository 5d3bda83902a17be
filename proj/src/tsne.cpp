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

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cad/dimred.hpp"
#include "cad/error.hpp"
#include "cad/rng.hpp"

namespace cad {

namespace {

// Conditional distribution and its perplexity for one scaled precision.
double row_perplexity(std::span<const double> shifted, double b, std::vector<double>& probs) {
  double sum = 0.0;
  for (std::size_t j = 0; j < shifted.size(); ++j) {
    probs[j] = std::exp(-b * shifted[j]);
    sum += probs[j];
  }
  double entropy_bits = 0.0;
  for (double& p : probs) {
    p /= sum;
    if (p > 0.0) entropy_bits -= p * std::log2(p);
  }
  return std::exp2(entropy_bits);
}

}  // namespace

SigmaCalibration calibrate_sigma(std::span<const double> sq_distances, double target_perplexity) {
  require(!sq_distances.empty(), ErrorCode::kInvalidArgument, "calibrate_sigma: empty distance row");
  require(target_perplexity >= 1.0, ErrorCode::kInvalidArgument, "calibrate_sigma: perplexity must be >= 1");
  double dmin = std::numeric_limits<double>::infinity();
  double dsum = 0.0;
  for (double d : sq_distances) {
    require(std::isfinite(d) && d >= 0.0, ErrorCode::kInvalidArgument, "calibrate_sigma: invalid distance");
    dmin = std::min(dmin, d);
    dsum += d;
  }
  require(dsum > 0.0, ErrorCode::kDegenerateData, "calibrate_sigma: unreachable perplexity, all distances are zero");
  const double scale = dsum / static_cast<double>(sq_distances.size());

  // Shifting by the minimum leaves the distribution unchanged and keeps
  // exp() away from underflow for large precisions.
  std::vector<double> shifted(sq_distances.size());
  for (std::size_t j = 0; j < shifted.size(); ++j) shifted[j] = (sq_distances[j] - dmin) / scale;

  SigmaCalibration out;
  out.probabilities.resize(shifted.size());
  double lo = -60.0;
  double hi = 60.0;
  double mid = 0.0;
  const double tolerance = 1e-10 * target_perplexity;
  for (int step = 1; step <= 100; ++step) {
    mid = 0.5 * (lo + hi);
    out.perplexity = row_perplexity(shifted, std::exp2(mid), out.probabilities);
    out.steps = step;
    if (std::abs(out.perplexity - target_perplexity) <= tolerance) break;
    // Perplexity falls as the precision grows.
    if (out.perplexity > target_perplexity) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.beta = std::exp2(mid) / scale;
  out.sigma = std::sqrt(1.0 / (2.0 * out.beta));
  return out;
}

void TsneConfig::validate(int n) const {
  require(perplexity > 0.0, ErrorCode::kInvalidArgument, "t-SNE perplexity must be positive");
  require(perplexity < (n - 1) / 3.0, ErrorCode::kInvalidArgument,
          "t-SNE perplexity " + std::to_string(perplexity) + " must be below (n-1)/3 = " + std::to_string((n - 1) / 3.0));
  require(iterations >= 250, ErrorCode::kInvalidArgument, "t-SNE needs at least 250 iterations");
  require(exaggeration_iterations >= 0 && exaggeration_iterations <= iterations, ErrorCode::kInvalidArgument,
          "t-SNE exaggeration_iterations out of range");
  require(learning_rate > 0.0 && early_exaggeration >= 1.0 && min_gain > 0.0, ErrorCode::kInvalidArgument,
          "t-SNE learning_rate, exaggeration and min_gain must be positive");
}

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (x.row(i) - x.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Eigen::MatrixXd jitter_duplicates(const Eigen::MatrixXd& x, std::uint64_t seed) {
  Eigen::MatrixXd out = x;
  const auto n = x.rows();
  std::vector<bool> duplicate(static_cast<std::size_t>(n), false);
  bool any = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (x.row(i) == x.row(j)) {
        duplicate[static_cast<std::size_t>(j)] = true;
        any = true;
      }
    }
  }
  if (!any) return out;
  Rng rng(derive_seed(seed, 0xD0B1EULL));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!duplicate[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = 0; j < x.cols(); ++j) out(i, j) += 1e-12 * rng.normal();
  }
  return out;
}

}  // namespace

double tsne_kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& embedding) {
  const auto n = embedding.rows();
  require(p.rows() == n && p.cols() == n, ErrorCode::kShapeMismatch, "tsne_kl_divergence: P/embedding size mismatch");
  Eigen::MatrixXd num = Eigen::MatrixXd::Zero(n, n);
  double z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      num(i, j) = 1.0 / (1.0 + (embedding.row(i) - embedding.row(j)).squaredNorm());
      z += num(i, j);
    }
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || p(i, j) <= 0.0) continue;
      const double q = std::max(num(i, j) / z, std::numeric_limits<double>::min());
      kl += p(i, j) * std::log(p(i, j) / q);
    }
  }
  return kl;
}

TsneResult tsne_embed(const Eigen::MatrixXd& input, const TsneConfig& config) {
  const auto n = static_cast<int>(input.rows());
  require(n >= 4, ErrorCode::kInvalidArgument, "t-SNE needs at least four points");
  require(input.allFinite(), ErrorCode::kInvalidArgument, "t-SNE input is not finite");
  config.validate(n);

  const Eigen::MatrixXd x = jitter_duplicates(input, config.seed);
  const Eigen::MatrixXd dist = squared_distances(x);

  TsneResult result;
  result.row_perplexity.resize(static_cast<std::size_t>(n));
  Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> row(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n; ++i) {
    for (int j = 0, k = 0; j < n; ++j) {
      if (j != i) row[static_cast<std::size_t>(k++)] = dist(i, j);
    }
    const SigmaCalibration cal = calibrate_sigma(row, config.perplexity);
    result.row_perplexity[static_cast<std::size_t>(i)] = cal.perplexity;
    for (int j = 0, k = 0; j < n; ++j) {
      if (j != i) cond(i, j) = cal.probabilities[static_cast<std::size_t>(k++)];
    }
  }
  result.p = (cond + cond.transpose()) / (2.0 * n);
  // Normalise once more so that sum P = 1 holds to roundoff.
  result.p /= result.p.sum();

  Rng rng(config.seed);
  Eigen::MatrixXd y(n, 2);
  for (int i = 0; i < n; ++i) {
    y(i, 0) = 1e-4 * rng.normal();
    y(i, 1) = 1e-4 * rng.normal();
  }
  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd grad(n, 2);
  Eigen::MatrixXd num(n, n);

  for (int iter = 0; iter < config.iterations; ++iter) {
    const double exaggeration = iter < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    const double momentum = iter < config.exaggeration_iterations ? config.initial_momentum : config.final_momentum;

    double z = 0.0;
    for (int i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (int j = i + 1; j < n; ++j) {
        const double dx = y(i, 0) - y(j, 0);
        const double dy = y(i, 1) - y(j, 1);
        const double v = 1.0 / (1.0 + dx * dx + dy * dy);
        num(i, j) = v;
        num(j, i) = v;
        z += 2.0 * v;
      }
    }
    for (int i = 0; i < n; ++i) {
      double gx = 0.0;
      double gy = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double mult = (exaggeration * result.p(i, j) - num(i, j) / z) * num(i, j);
        gx += mult * (y(i, 0) - y(j, 0));
        gy += mult * (y(i, 1) - y(j, 1));
      }
      grad(i, 0) = 4.0 * gx;
      grad(i, 1) = 4.0 * gy;
    }
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < 2; ++d) {
        const bool flipped = update(i, d) * grad(i, d) < 0.0;
        gains(i, d) = flipped ? gains(i, d) + 0.2 : gains(i, d) * 0.8;
        gains(i, d) = std::max(gains(i, d), config.min_gain);
        update(i, d) = momentum * update(i, d) - config.learning_rate * gains(i, d) * grad(i, d);
        y(i, d) += update(i, d);
      }
    }
    const Eigen::RowVector2d centre = y.colwise().mean();
    y.rowwise() -= centre;
    if (!y.allFinite()) {
      fail(ErrorCode::kNumerical, "t-SNE overflow at iteration " + std::to_string(iter + 1));
    }
    if (iter + 1 == config.exaggeration_iterations) result.kl_after_exaggeration = tsne_kl_divergence(result.p, y);
  }
  result.kl_divergence = tsne_kl_divergence(result.p, y);
  if (config.exaggeration_iterations == 0) result.kl_after_exaggeration = result.kl_divergence;
  result.embedding = std::move(y);
  return result;
}

}  // namespace cad
