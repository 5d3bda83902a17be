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

#include "cad/ocsvm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cad/error.hpp"
#include "cad/rng.hpp"

namespace cad {

void OcSvmConfig::validate() const {
  require(nu > 0.0 && nu <= 1.0, ErrorCode::kInvalidArgument, "OC-SVM nu must be in (0,1]");
  require(!gamma || *gamma > 0.0, ErrorCode::kInvalidArgument, "OC-SVM gamma must be positive");
  require(kkt_tolerance > 0.0, ErrorCode::kInvalidArgument, "OC-SVM kkt_tolerance must be positive");
  require(max_passes >= 1, ErrorCode::kInvalidArgument, "OC-SVM max_passes must be >= 1");
}

double gamma_scale(const Eigen::MatrixXd& x) {
  require(x.rows() >= 2 && x.cols() >= 1, ErrorCode::kInvalidArgument, "gamma_scale needs at least two rows");
  const double count = static_cast<double>(x.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) sum += x.data()[i];
  const double mean = sum / count;
  double ss = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = x.data()[i] - mean;
    ss += d * d;
  }
  const double var = ss / count;
  require(var > 0.0, ErrorCode::kDegenerateData, "gamma_scale: data has zero variance");
  return 1.0 / (static_cast<double>(x.cols()) * var);
}

double rbf_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b,
                  double gamma) {
  return std::exp(-gamma * (a - b).squaredNorm());
}

OcSvmModel ocsvm_fit(const Eigen::MatrixXd& x, const OcSvmConfig& config) {
  config.validate();
  const auto n = static_cast<int>(x.rows());
  require(n >= 2, ErrorCode::kInvalidArgument, "OC-SVM needs at least two training rows");
  require(x.allFinite(), ErrorCode::kInvalidArgument, "OC-SVM training data is not finite");
  const double nu_n = config.nu * n;
  require(nu_n >= 1.0 - 1e-12, ErrorCode::kInfeasible,
          "OC-SVM infeasible: nu * n = " + std::to_string(nu_n) + " < 1");

  const double gamma = config.gamma ? *config.gamma : gamma_scale(x);
  const double upper = 1.0 / nu_n;

  Eigen::MatrixXd kernel(n, n);
  for (int i = 0; i < n; ++i) {
    kernel(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double v = rbf_kernel(x.row(i), x.row(j), gamma);
      kernel(i, j) = v;
      kernel(j, i) = v;
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  if (config.seed != 0) {
    Rng rng(config.seed);
    shuffle(order, rng);
  }
  const int initial = std::min(n, static_cast<int>(std::ceil(nu_n - 1e-9)));
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  for (int t = 0; t < initial; ++t) alpha(order[static_cast<std::size_t>(t)]) = 1.0 / initial;
  Eigen::VectorXd grad = kernel * alpha;

  OcSvmModel model;
  model.gamma = gamma;
  model.nu = config.nu;
  model.n_train = n;
  model.converged = false;
  double violation = 0.0;
  long passes = 0;
  for (;;) {
    // i: may grow (alpha < C) with the smallest gradient;
    // j: may shrink (alpha > 0) with the largest gradient.
    int i = -1;
    int j = -1;
    double g_min = std::numeric_limits<double>::infinity();
    double g_max = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < n; ++t) {
      if (alpha(t) < upper && grad(t) < g_min) {
        g_min = grad(t);
        i = t;
      }
      if (alpha(t) > 0.0 && grad(t) > g_max) {
        g_max = grad(t);
        j = t;
      }
    }
    violation = (i < 0 || j < 0) ? 0.0 : g_max - g_min;
    if (violation <= config.kkt_tolerance) {
      model.converged = true;
      break;
    }
    if (passes >= config.max_passes) break;
    ++passes;

    const double curvature = std::max(kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j), 1e-12);
    double step = (grad(j) - grad(i)) / curvature;
    const double room_i = upper - alpha(i);
    const double room_j = alpha(j);
    bool i_at_upper = false;
    bool j_at_zero = false;
    if (step >= room_i && room_i <= room_j) {
      step = room_i;
      i_at_upper = true;
      j_at_zero = room_i == room_j;
    } else if (step >= room_j) {
      step = room_j;
      j_at_zero = true;
    }
    alpha(i) = i_at_upper ? upper : alpha(i) + step;
    alpha(j) = j_at_zero ? 0.0 : alpha(j) - step;
    grad.noalias() += step * (kernel.col(i) - kernel.col(j));
  }
  model.kkt_residual = violation;
  model.passes = passes;

  double free_sum = 0.0;
  int free_count = 0;
  double lower_bound = -std::numeric_limits<double>::infinity();  // max grad over alpha == C
  double upper_bound = std::numeric_limits<double>::infinity();   // min grad over alpha == 0
  for (int t = 0; t < n; ++t) {
    if (alpha(t) > 0.0 && alpha(t) < upper) {
      free_sum += grad(t);
      ++free_count;
    } else if (alpha(t) >= upper) {
      lower_bound = std::max(lower_bound, grad(t));
    } else {
      upper_bound = std::min(upper_bound, grad(t));
    }
  }
  if (free_count > 0) {
    model.rho = free_sum / free_count;
  } else if (std::isfinite(lower_bound) && std::isfinite(upper_bound)) {
    model.rho = 0.5 * (lower_bound + upper_bound);
  } else {
    model.rho = std::isfinite(lower_bound) ? lower_bound : upper_bound;
  }

  for (int t = 0; t < n; ++t) {
    if (alpha(t) > 0.0) {
      model.support_indices.push_back(t);
      model.alphas.push_back(alpha(t));
    }
  }
  model.support_vectors.resize(static_cast<Eigen::Index>(model.support_indices.size()), x.cols());
  for (std::size_t s = 0; s < model.support_indices.size(); ++s) {
    model.support_vectors.row(static_cast<Eigen::Index>(s)) = x.row(model.support_indices[s]);
  }
  return model;
}

double decision(const OcSvmModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  require(x.size() == model.dim(), ErrorCode::kShapeMismatch,
          "decision: expected a " + std::to_string(model.dim()) + "-vector, got " + std::to_string(x.size()));
  double sum = 0.0;
  for (std::size_t s = 0; s < model.alphas.size(); ++s) {
    sum += model.alphas[s] * rbf_kernel(model.support_vectors.row(static_cast<Eigen::Index>(s)), x, model.gamma);
  }
  return sum - model.rho;
}

std::vector<double> decision_rows(const OcSvmModel& model, const Eigen::MatrixXd& x) {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = decision(model, x.row(i));
  return out;
}

Prediction predict_from_score(double decision_value) noexcept {
  return decision_value >= 0.0 ? Prediction::kInlier : Prediction::kOutlier;
}

Prediction predict(const OcSvmModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return predict_from_score(decision(model, x));
}

double dual_objective(const OcSvmModel& model) {
  double total = 0.0;
  const auto m = static_cast<Eigen::Index>(model.alphas.size());
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) {
      total += model.alphas[a] * model.alphas[b] *
               rbf_kernel(model.support_vectors.row(a), model.support_vectors.row(b), model.gamma);
    }
  }
  return 0.5 * total;
}

}  // namespace cad
