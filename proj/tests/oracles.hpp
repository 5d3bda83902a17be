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

// Reference computations used by the tests. Deliberately naive and
// independent of the library code paths they check.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

/// Cyclic Jacobi eigensolver for a symmetric matrix. Eigenvalues are
/// returned in descending order; eigenvectors are the matching columns.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> jacobi_eigen(Eigen::MatrixXd a, int max_sweeps = 100) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  Eigen::VectorXd values(n);
  Eigen::MatrixXd vectors(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return {values, vectors};
}

/// Sample covariance with divisor n - 1, computed entry by entry.
inline Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), d = x.cols();
  std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) mean[static_cast<std::size_t>(j)] += x(i, j);
    mean[static_cast<std::size_t>(j)] /= static_cast<double>(n);
  }
  Eigen::MatrixXd c(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = 0; b < d; ++b) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        s += (x(i, a) - mean[static_cast<std::size_t>(a)]) * (x(i, b) - mean[static_cast<std::size_t>(b)]);
      }
      c(a, b) = s / static_cast<double>(n - 1);
    }
  }
  return c;
}

/// Two-pass mean of squared differences.
template <typename A, typename B>
double mean_squared_difference(const A& a, const B& b, std::size_t n) {
  long double sum = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const long double d = static_cast<long double>(a[i]) - static_cast<long double>(b[i]);
    sum += d * d;
  }
  return static_cast<double>(sum / static_cast<long double>(n));
}

/// Two-pass population variance.
inline double population_variance(const std::vector<double>& v) {
  long double mean = 0.0L;
  for (double x : v) mean += x;
  mean /= static_cast<long double>(v.size());
  long double ss = 0.0L;
  for (double x : v) ss += (x - mean) * (x - mean);
  return static_cast<double>(ss / static_cast<long double>(v.size()));
}

/// AUC by enumerating every positive/negative pair.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// Perplexity 2^H of the Gaussian conditional at bandwidth sigma.
inline double perplexity_at(const std::vector<double>& sq_distances, double sigma) {
  const double dmin = *std::min_element(sq_distances.begin(), sq_distances.end());
  std::vector<double> w;
  double z = 0.0;
  for (double d : sq_distances) {
    w.push_back(std::exp(-(d - dmin) / (2.0 * sigma * sigma)));
    z += w.back();
  }
  double h = 0.0;
  for (double x : w) {
    const double p = x / z;
    if (p > 0.0) h -= p * std::log2(p);
  }
  return std::exp2(h);
}

/// Bandwidth whose perplexity is closest to the target on a uniform grid.
inline double sigma_by_grid_scan(const std::vector<double>& sq_distances, double target, double lo, double hi,
                                 double step) {
  double best_sigma = lo;
  double best_gap = std::numeric_limits<double>::infinity();
  for (double s = lo; s <= hi; s += step) {
    const double gap = std::abs(perplexity_at(sq_distances, s) - target);
    if (gap < best_gap) {
      best_gap = gap;
      best_sigma = s;
    }
  }
  return best_sigma;
}

/// Euclidean projection onto {0 <= a_i <= upper, sum a = 1} by bisection on
/// the shift.
inline Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double upper) {
  double lo = v.minCoeff() - upper - 1.0;
  double hi = v.maxCoeff() + 1.0;
  Eigen::VectorXd a(v.size());
  for (int it = 0; it < 200; ++it) {
    const double tau = 0.5 * (lo + hi);
    a = (v.array() - tau).cwiseMax(0.0).cwiseMin(upper);
    if (a.sum() > 1.0) lo = tau;
    else hi = tau;
  }
  const double tau = 0.5 * (lo + hi);
  return (v.array() - tau).cwiseMax(0.0).cwiseMin(upper);
}

/// min 1/2 a^T K a on the capped simplex by accelerated projected gradient.
inline double projected_gradient_dual(const Eigen::MatrixXd& k, double upper, int iterations = 200000) {
  const Eigen::Index n = k.rows();
  const double lipschitz = k.cwiseAbs().rowwise().sum().maxCoeff();
  Eigen::VectorXd a = project_capped_simplex(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)), upper);
  Eigen::VectorXd y = a;
  double t = 1.0;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd next = project_capped_simplex(y - (k * y) / lipschitz, upper);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - a);
    if ((next - a).norm() < 1e-15) {
      a = next;
      break;
    }
    a = next;
    t = t_next;
  }
  return 0.5 * a.dot(k * a);
}

/// Mean silhouette coefficient with Euclidean distances.
inline double silhouette(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  const Eigen::Index n = x.rows();
  const int clusters = *std::max_element(labels.begin(), labels.end()) + 1;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> sum(static_cast<std::size_t>(clusters), 0.0);
    std::vector<int> count(static_cast<std::size_t>(clusters), 0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(j)]);
      sum[c] += (x.row(i) - x.row(j)).norm();
      count[c] += 1;
    }
    const auto own = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
    if (count[own] == 0) continue;
    const double a = sum[own] / count[own];
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sum.size(); ++c) {
      if (c != own && count[c] > 0) b = std::min(b, sum[c] / count[c]);
    }
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

}  // namespace oracle
