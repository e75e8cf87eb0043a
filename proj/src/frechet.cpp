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

#include "cfid/frechet.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "cfid/errors.hpp"
#include "cfid/linalg.hpp"

namespace cfid {
namespace {

void CheckDims(const GaussianStats& r, const GaussianStats& g) {
  Validate(r);
  Validate(g);
  if (r.dim() != g.dim()) {
    throw DimensionMismatch("cannot compare stats of dimension " +
                            std::to_string(r.dim()) + " and " +
                            std::to_string(g.dim()));
  }
  if (r.count < 2 || g.count < 2) {
    throw InsufficientSamples("Frechet distance needs at least 2 samples per side");
  }
}

struct CrossTerm {
  double value = 0.0;
  std::size_t clamped = 0;
  double worst_negative_ratio = 0.0;
};

double SumSqrt(const Eigen::VectorXd& values) {
  return values.cwiseSqrt().sum();
}

// Tr((S Sigma_g S)^{1/2}) with S = Sigma_r^{1/2}; nullopt if either
// eigendecomposition fails. With Sigma_r = V L V^T and F = V L^{1/2},
// S Sigma_g S = V (F^T Sigma_g F) V^T has the spectrum of F^T Sigma_g F, and
// columns of F for clamped eigenvalues are zero and can be dropped.
std::optional<CrossTerm> DenseCrossTerm(const Eigen::MatrixXd& sigma_r,
                                        const Eigen::MatrixXd& sigma_g) {
  const std::optional<SymmetricEigen> er = EigenSymmetric(sigma_r);
  if (!er) return std::nullopt;
  const ClampResult lr = ClampSmall(er->values, kSpectrumClampTolerance);
  // Ascending order: the kept eigenvalues are the trailing block.
  Eigen::Index first = 0;
  while (first < lr.values.size() && lr.values[first] == 0.0) ++first;
  const Eigen::Index rank = lr.values.size() - first;
  if (rank == 0) {
    return CrossTerm{0.0, lr.clamped + static_cast<std::size_t>(first),
                     lr.worst_negative_ratio};
  }
  const Eigen::MatrixXd f = er->vectors.rightCols(rank) *
                            lr.values.tail(rank).cwiseSqrt().asDiagonal();
  const Eigen::MatrixXd gf = sigma_g * f;
  Eigen::MatrixXd m = f.transpose() * gf;
  m = 0.5 * (m + m.transpose()).eval();
  const std::optional<Eigen::VectorXd> em = EigenvaluesSymmetric(m);
  if (!em) return std::nullopt;
  ClampResult lm = ClampSmall(*em, kSpectrumClampTolerance);
  // Directions outside the range of Sigma_r are null for S Sigma_g S too.
  lm.clamped += static_cast<std::size_t>(first);
  return CrossTerm{SumSqrt(lm.values), lr.clamped + lm.clamped,
                   std::min(lr.worst_negative_ratio, lm.worst_negative_ratio)};
}

void FinishTotals(FrechetBreakdown& out) {
  out.raw_total = out.mean_term + out.trace_r + out.trace_g - 2.0 * out.cross_term;
  out.total = std::max(out.raw_total, 0.0);
  const double floor =
      -1e-9 * std::max(1.0, std::abs(out.trace_r) + std::abs(out.trace_g));
  if (out.raw_total < floor) out.clamping_warning = true;
}

FrechetBreakdown DenseFromMatrices(const GaussianStats& r,
                                   const Eigen::MatrixXd& sigma_r,
                                   const GaussianStats& g,
                                   const Eigen::MatrixXd& sigma_g) {
  FrechetBreakdown out;
  out.path = FrechetPath::kDense;
  out.mean_term = (r.mean - g.mean).squaredNorm();
  out.trace_r = sigma_r.trace();
  out.trace_g = sigma_g.trace();

  std::optional<CrossTerm> cross;
  if (sigma_r.allFinite() && sigma_g.allFinite()) {
    cross = DenseCrossTerm(sigma_r, sigma_g);
  }
  if (!cross) {
    const auto d = sigma_r.rows();
    const Eigen::MatrixXd offset =
        kRegularizationEpsilon * Eigen::MatrixXd::Identity(d, d);
    cross = DenseCrossTerm(sigma_r + offset, sigma_g + offset);
    out.regularized = true;
    if (!cross) {
      throw NumericalFailure(
          "symmetric eigendecomposition failed even after regularization");
    }
  }
  out.cross_term = cross->value;
  out.clamped_eigenvalues = cross->clamped;
  out.clamping_warning = cross->worst_negative_ratio < -kClampWarningRatio;
  FinishTotals(out);
  return out;
}

}  // namespace

std::string_view ToString(FrechetPath path) {
  return path == FrechetPath::kDense ? "dense" : "lowrank";
}

FrechetBreakdown FrechetDense(const GaussianStats& r, const GaussianStats& g) {
  CheckDims(r, g);
  if (!r.is_dense() || !g.is_dense()) {
    throw RepresentationMismatch("dense Frechet path needs dense covariances");
  }
  return DenseFromMatrices(r, std::get<DenseCovariance>(r.covariance).matrix, g,
                           std::get<DenseCovariance>(g.covariance).matrix);
}

FrechetBreakdown FrechetLowRank(const GaussianStats& r, const GaussianStats& g) {
  CheckDims(r, g);
  if (r.is_dense() || g.is_dense()) {
    throw RepresentationMismatch("low-rank Frechet path needs low-rank factors");
  }
  const RowMatrix& ar = std::get<LowRankFactor>(r.covariance).factor;
  const RowMatrix& ag = std::get<LowRankFactor>(g.covariance).factor;

  FrechetBreakdown out;
  out.path = FrechetPath::kLowRank;
  out.mean_term = (r.mean - g.mean).squaredNorm();
  out.trace_r = ar.squaredNorm();
  out.trace_g = ag.squaredNorm();

  const Eigen::MatrixXd cross = ar * ag.transpose();
  const std::optional<Eigen::VectorXd> sv =
      cross.allFinite() ? SingularValues(cross) : std::nullopt;
  if (!sv) throw NumericalFailure("SVD of the cross factor failed");
  const ClampResult clamped = ClampSmall(*sv, kSpectrumClampTolerance);
  out.cross_term = clamped.values.sum();
  out.clamped_eigenvalues = clamped.clamped;
  FinishTotals(out);
  return out;
}

FrechetBreakdown Frechet(const GaussianStats& r, const GaussianStats& g) {
  CheckDims(r, g);
  if (r.is_dense() && g.is_dense()) return FrechetDense(r, g);
  if (!r.is_dense() && !g.is_dense()) return FrechetLowRank(r, g);
  if (r.dim() > kDenseThreshold) {
    throw RepresentationMismatch(
        "dimension " + std::to_string(r.dim()) +
        " mixes dense and low-rank statistics; above " +
        std::to_string(kDenseThreshold) +
        " both sides must use the low-rank representation");
  }
  return DenseFromMatrices(r, r.ImpliedCovariance(), g, g.ImpliedCovariance());
}

}  // namespace cfid
