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
#include <cstdint>
#include <optional>
#include <vector>

namespace cad {

struct OcSvmConfig {
  double nu = 0.05;
  std::optional<double> gamma;  // empty = "scale"
  double kkt_tolerance = 1e-6;
  long max_passes = 1'000'000;
  /// 0 initializes alpha on the first ceil(nu n) rows in input order; any
  /// other value on the first ceil(nu n) rows of a seeded permutation.
  std::uint64_t seed = 0;

  void validate() const;
};

struct OcSvmModel {
  Eigen::MatrixXd support_vectors;  // m x k
  std::vector<double> alphas;       // m, each in (0, 1/(nu n)]
  std::vector<int> support_indices; // rows of the training matrix
  double rho = 0.0;
  double gamma = 0.0;
  double nu = 0.0;
  int n_train = 0;
  bool converged = true;
  double kkt_residual = 0.0;
  long passes = 0;

  int dim() const noexcept { return static_cast<int>(support_vectors.cols()); }
};

/// 1 / (k * var(X)) with var the population variance of every entry.
/// Throws kDegenerateData on zero variance.
double gamma_scale(const Eigen::MatrixXd& x);

double rbf_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b,
                  double gamma);

/// nu-one-class SVM in the scaled dual
///   minimize 1/2 a^T K a   s.t.  0 <= a_i <= 1/(nu n),  sum a = 1,
/// solved by pairwise updates on the maximal KKT-violating pair. rho is the
/// mean of K a over unbounded support vectors, or the midpoint of the
/// KKT-implied interval when there are none. Stops when the violation drops
/// to kkt_tolerance or after max_passes updates (converged = false).
/// Throws kInfeasible when nu n < 1.
OcSvmModel ocsvm_fit(const Eigen::MatrixXd& x, const OcSvmConfig& config = {});

/// sum_i alpha_i exp(-gamma |sv_i - x|^2) - rho; positive on the inlier side.
double decision(const OcSvmModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);
std::vector<double> decision_rows(const OcSvmModel& model, const Eigen::MatrixXd& x);

enum class Prediction { kInlier, kOutlier };

/// Inlier iff decision >= 0.
Prediction predict(const OcSvmModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);
Prediction predict_from_score(double decision_value) noexcept;

/// 1/2 a^T K a over the support vectors.
double dual_objective(const OcSvmModel& model);

}  // namespace cad
