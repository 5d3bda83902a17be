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

#include <Eigen/Eigenvalues>
#include <cmath>

#include "cad/dimred.hpp"
#include "cad/error.hpp"

namespace cad {

namespace {

void fix_sign(Eigen::MatrixXd& components, Eigen::Index row) {
  auto axis = components.row(row);
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < axis.size(); ++j) {
    if (std::abs(axis(j)) > std::abs(axis(best))) best = j;
  }
  if (axis(best) < 0.0) axis = -axis;
}

}  // namespace

PcaModel pca_fit(const Eigen::MatrixXd& x, int k) {
  const auto n = x.rows();
  const auto d = x.cols();
  require(n >= 2, ErrorCode::kInvalidArgument, "pca_fit needs at least two rows");
  require(k >= 1 && k <= std::min<Eigen::Index>(n - 1, d), ErrorCode::kInvalidArgument,
          "pca_fit: k=" + std::to_string(k) + " outside [1, min(n-1, d)]");
  require(x.allFinite(), ErrorCode::kInvalidArgument, "pca_fit: non-finite input");

  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
  const double denom = static_cast<double>(n - 1);
  model.total_variance = centered.squaredNorm() / denom;
  require(model.total_variance > 0.0, ErrorCode::kDegenerateData, "pca_fit: all rows are identical");

  model.components.resize(k, d);
  model.explained_variance.resize(k);
  if (n - 1 >= d) {
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    require(eig.info() == Eigen::Success, ErrorCode::kNumerical, "pca_fit: eigendecomposition failed");
    for (int i = 0; i < k; ++i) {
      const Eigen::Index col = d - 1 - i;  // eigenvalues ascend
      model.explained_variance(i) = std::max(0.0, eig.eigenvalues()(col));
      model.components.row(i) = eig.eigenvectors().col(col).transpose();
    }
  } else {
    const Eigen::MatrixXd gram = (centered * centered.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    require(eig.info() == Eigen::Success, ErrorCode::kNumerical, "pca_fit: eigendecomposition failed");
    const double largest = eig.eigenvalues()(n - 1);
    for (int i = 0; i < k; ++i) {
      const Eigen::Index col = n - 1 - i;
      const double lambda = std::max(0.0, eig.eigenvalues()(col));
      model.explained_variance(i) = lambda;
      Eigen::RowVectorXd axis;
      if (lambda > 1e-12 * largest) {
        axis = (centered.transpose() * eig.eigenvectors().col(col)).transpose() / std::sqrt(denom * lambda);
      } else {
        // Null direction: any unit vector orthogonal to the previous axes.
        for (Eigen::Index j = 0;; ++j) {
          require(j < d, ErrorCode::kNumerical, "pca_fit: cannot complete the orthonormal basis");
          axis = Eigen::RowVectorXd::Unit(d, j);
          for (int p = 0; p < i; ++p) axis -= axis.dot(model.components.row(p)) * model.components.row(p);
          if (axis.norm() > 1e-6) break;
        }
      }
      // Re-orthogonalize against earlier axes to absorb roundoff.
      for (int p = 0; p < i; ++p) axis -= axis.dot(model.components.row(p)) * model.components.row(p);
      model.components.row(i) = axis / axis.norm();
    }
  }
  for (int i = 0; i < k; ++i) fix_sign(model.components, i);
  return model;
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& x) {
  require(x.cols() == model.input_dim(), ErrorCode::kShapeMismatch,
          "pca_transform: expected " + std::to_string(model.input_dim()) + " columns, got " + std::to_string(x.cols()));
  return (x.rowwise() - model.mean.transpose()) * model.components.transpose();
}

Eigen::MatrixXd pca_inverse_transform(const PcaModel& model, const Eigen::MatrixXd& y) {
  require(y.cols() == model.output_dim(), ErrorCode::kShapeMismatch,
          "pca_inverse_transform: expected " + std::to_string(model.output_dim()) + " columns, got " +
              std::to_string(y.cols()));
  return (y * model.components).rowwise() + model.mean.transpose();
}

Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& x) {
  require(x.rows() >= 2, ErrorCode::kInvalidArgument, "standardize_columns needs at least two rows");
  Eigen::MatrixXd out = x.rowwise() - x.colwise().mean();
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double sd = std::sqrt(out.col(j).squaredNorm() / static_cast<double>(out.rows() - 1));
    if (sd > 0.0) out.col(j) /= sd;
  }
  return out;
}

}  // namespace cad
