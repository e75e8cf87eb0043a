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

// Per-level Gaussian statistics. Covariances are unbiased (N - 1 divisor) and
// always accumulated in double precision.
//
// Two representations exist because the low-level taps are far too wide for a
// dense covariance (341056^2 doubles is ~930 GB):
//   - dense:    the D x D covariance matrix,
//   - low-rank: the N x D factor A with rows (x_i - mean) / sqrt(N - 1), so
//               that Sigma = A^T A.

#ifndef CFID_STATS_HPP_
#define CFID_STATS_HPP_

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace cfid {

// Widest dimension for which dense covariances are formed.
inline constexpr std::size_t kDenseThreshold = 4096;

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class CovarianceMode { kAuto, kDense, kLowRank };

std::string_view ToString(CovarianceMode mode);
CovarianceMode ParseCovarianceMode(std::string_view name);

struct DenseCovariance {
  Eigen::MatrixXd matrix;
};

struct LowRankFactor {
  RowMatrix factor;  // N x D
};

struct GaussianStats {
  std::size_t count = 0;
  Eigen::VectorXd mean;
  std::variant<DenseCovariance, LowRankFactor> covariance;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
  bool is_dense() const {
    return std::holds_alternative<DenseCovariance>(covariance);
  }
  std::string_view representation() const {
    return is_dense() ? "dense_cov" : "lowrank_factor";
  }
  // Tr(Sigma) for either representation.
  double Trace() const;
  // Dense Sigma; throws RepresentationMismatch above kDenseThreshold.
  Eigen::MatrixXd ImpliedCovariance() const;
};

// Throws InvalidArgument if the shapes are inconsistent or count < 1.
void Validate(const GaussianStats& stats);

// Streaming first and second moments of one feature level. A dense co-moment
// matrix is maintained with Welford updates; raw rows are retained when a
// low-rank factor may be needed.
class MomentAccumulator {
 public:
  struct Options {
    bool keep_comoment = true;
    bool keep_rows = false;
  };

  // Co-moment iff dim <= kDenseThreshold, rows iff dim > kDenseThreshold.
  static Options DefaultOptions(std::size_t dim);

  explicit MomentAccumulator(std::size_t dim);
  MomentAccumulator(std::size_t dim, Options options);

  // Throws DimensionMismatch or NonFiniteSample; the accumulator is unchanged
  // when it throws.
  void Add(std::span<const float> sample);
  void Add(std::span<const double> sample);

  // Parallel combination (Chan et al.): equivalent to having added this
  // accumulator's samples followed by `other`'s. An empty accumulator is the
  // identity on either side. Stored options become the intersection.
  void Merge(const MomentAccumulator& other);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return count_; }
  const Options& options() const noexcept { return options_; }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  // Symmetric sum of squared deviations; requires keep_comoment.
  Eigen::MatrixXd Comoment() const;
  // Retained samples, count() x dim() row-major; requires keep_rows.
  std::span<const double> rows() const noexcept { return rows_; }

 private:
  void AddChecked(const Eigen::VectorXd& x);

  std::size_t dim_;
  Options options_;
  std::size_t count_ = 0;
  Eigen::VectorXd mean_;
  // Only the lower triangle is maintained.
  Eigen::MatrixXd comoment_;
  std::vector<double> rows_;
};

// kAuto picks dense iff dim <= kDenseThreshold.
// Throws InsufficientSamples if count < 2, RepresentationMismatch for a dense
// request above kDenseThreshold, InvalidArgument if the accumulator did not
// retain what the representation needs.
GaussianStats Finalize(const MomentAccumulator& acc,
                       CovarianceMode mode = CovarianceMode::kAuto);

}  // namespace cfid

#endif  // CFID_STATS_HPP_
