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

// Frechet distance between two Gaussians,
//
//   d^2 = |mu_r - mu_g|^2 + Tr(Sigma_r) + Tr(Sigma_g)
//         - 2 Tr((Sigma_r Sigma_g)^{1/2}).
//
// The dense path evaluates the cross term as Tr((S Sigma_g S)^{1/2}) with
// S = Sigma_r^{1/2}, which has the same trace and only needs symmetric
// eigendecompositions. The low-rank path uses Sigma = A^T A: the nonzero
// eigenvalues of Sigma_r Sigma_g are the squared singular values of
// A_r A_g^T, so the cross term is that small matrix's nuclear norm.

#ifndef CFID_FRECHET_HPP_
#define CFID_FRECHET_HPP_

#include <cstddef>
#include <string_view>

#include "cfid/stats.hpp"

namespace cfid {

enum class FrechetPath { kDense, kLowRank };

std::string_view ToString(FrechetPath path);

// Eigen/singular values below this fraction of the largest magnitude are
// treated as zero.
inline constexpr double kSpectrumClampTolerance = 1e-12;
// A clamped value more negative than this fraction of the largest magnitude
// sets FrechetBreakdown::clamping_warning.
inline constexpr double kClampWarningRatio = 1e-8;
// Diagonal offset used for the single retry after a failed decomposition.
inline constexpr double kRegularizationEpsilon = 1e-6;

struct FrechetBreakdown {
  double mean_term = 0.0;   // |mu_r - mu_g|^2
  double trace_r = 0.0;     // Tr(Sigma_r)
  double trace_g = 0.0;     // Tr(Sigma_g)
  double cross_term = 0.0;  // Tr((Sigma_r Sigma_g)^{1/2})
  // mean_term + trace_r + trace_g - 2 cross_term before clamping at zero.
  double raw_total = 0.0;
  double total = 0.0;  // max(raw_total, 0)
  std::size_t clamped_eigenvalues = 0;
  FrechetPath path = FrechetPath::kDense;
  // The eigendecomposition failed once and was retried with
  // kRegularizationEpsilon added to both covariance diagonals.
  bool regularized = false;
  // A clamped eigenvalue was markedly negative, or raw_total fell below
  // -1e-9 * max(1, |trace_r| + |trace_g|).
  bool clamping_warning = false;
};

// Both stats dense with equal dims. Throws DimensionMismatch,
// RepresentationMismatch or NumericalFailure.
FrechetBreakdown FrechetDense(const GaussianStats& r, const GaussianStats& g);

// Both stats low-rank with equal dims.
FrechetBreakdown FrechetLowRank(const GaussianStats& r, const GaussianStats& g);

// Dispatches on representation. A mixed pair is evaluated densely when
// dim <= kDenseThreshold; otherwise RepresentationMismatch is thrown since
// the dense side cannot be factored.
FrechetBreakdown Frechet(const GaussianStats& r, const GaussianStats& g);

}  // namespace cfid

#endif  // CFID_FRECHET_HPP_
