// Copyright (c) the CFID Project Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CFID_LINALG_HPP_
#define CFID_LINALG_HPP_

#include <Eigen/Dense>
#include <cstddef>
#include <optional>

namespace cfid {

struct SymmetricEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns
};

// Eigendecomposition of a symmetric matrix (lower triangle is read).
// Returns nullopt if the QR iteration does not converge or the result is not
// finite.
std::optional<SymmetricEigen> EigenSymmetric(const Eigen::MatrixXd& a);

// Eigenvalues only, ascending.
std::optional<Eigen::VectorXd> EigenvaluesSymmetric(const Eigen::MatrixXd& a);

// Singular values of a general matrix, descending. nullopt on failure.
std::optional<Eigen::VectorXd> SingularValues(const Eigen::MatrixXd& a);

struct ClampResult {
  Eigen::VectorXd values;
  std::size_t clamped = 0;
  // Most negative input value relative to the largest magnitude (<= 0).
  double worst_negative_ratio = 0.0;
};

// Sets every value below rel_tol * max|value| to zero and counts them.
ClampResult ClampSmall(const Eigen::VectorXd& values, double rel_tol);

}  // namespace cfid

#endif  // CFID_LINALG_HPP_
