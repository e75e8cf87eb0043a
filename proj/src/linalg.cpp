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

#include "cfid/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace cfid {

std::optional<SymmetricEigen> EigenSymmetric(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) return std::nullopt;
  SymmetricEigen result{solver.eigenvalues(), solver.eigenvectors()};
  if (!result.values.allFinite() || !result.vectors.allFinite()) return std::nullopt;
  return result;
}

std::optional<Eigen::VectorXd> EigenvaluesSymmetric(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success || !solver.eigenvalues().allFinite()) {
    return std::nullopt;
  }
  return solver.eigenvalues();
}

std::optional<Eigen::VectorXd> SingularValues(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return Eigen::VectorXd();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
  if (svd.info() != Eigen::Success || !svd.singularValues().allFinite()) {
    return std::nullopt;
  }
  return svd.singularValues();
}

ClampResult ClampSmall(const Eigen::VectorXd& values, double rel_tol) {
  ClampResult out;
  out.values = values;
  const double scale = values.size() > 0 ? values.cwiseAbs().maxCoeff() : 0.0;
  const double threshold = rel_tol * scale;
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    double& v = out.values[i];
    if (v < threshold) {
      if (scale > 0.0) {
        out.worst_negative_ratio = std::min(out.worst_negative_ratio, v / scale);
      }
      v = 0.0;
      ++out.clamped;
    }
  }
  return out;
}

}  // namespace cfid
