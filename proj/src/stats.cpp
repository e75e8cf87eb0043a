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

#include "cfid/stats.hpp"

#include <cmath>
#include <string>

#include "cfid/errors.hpp"

namespace cfid {

std::string_view ToString(CovarianceMode mode) {
  switch (mode) {
    case CovarianceMode::kAuto:
      return "auto";
    case CovarianceMode::kDense:
      return "dense";
    case CovarianceMode::kLowRank:
      return "lowrank";
  }
  return "unknown";
}

CovarianceMode ParseCovarianceMode(std::string_view name) {
  if (name == "auto") return CovarianceMode::kAuto;
  if (name == "dense") return CovarianceMode::kDense;
  if (name == "lowrank") return CovarianceMode::kLowRank;
  throw InvalidArgument("unknown covariance mode '" + std::string(name) + "'");
}

double GaussianStats::Trace() const {
  if (const auto* dense = std::get_if<DenseCovariance>(&covariance)) {
    return dense->matrix.trace();
  }
  return std::get<LowRankFactor>(covariance).factor.squaredNorm();
}

Eigen::MatrixXd GaussianStats::ImpliedCovariance() const {
  if (const auto* dense = std::get_if<DenseCovariance>(&covariance)) {
    return dense->matrix;
  }
  if (dim() > kDenseThreshold) {
    throw RepresentationMismatch(
        "cannot form a dense covariance of dimension " + std::to_string(dim()) +
        "; the low-rank representation is required above " +
        std::to_string(kDenseThreshold));
  }
  const RowMatrix& a = std::get<LowRankFactor>(covariance).factor;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(a.cols(), a.cols());
  sigma.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  return sigma.selfadjointView<Eigen::Lower>();
}

void Validate(const GaussianStats& stats) {
  if (stats.count < 1) throw InvalidArgument("stats have no samples");
  const auto d = stats.mean.size();
  if (d == 0) throw InvalidArgument("stats have zero dimension");
  if (const auto* dense = std::get_if<DenseCovariance>(&stats.covariance)) {
    if (dense->matrix.rows() != d || dense->matrix.cols() != d) {
      throw InvalidArgument("dense covariance shape does not match mean");
    }
  } else {
    const RowMatrix& a = std::get<LowRankFactor>(stats.covariance).factor;
    if (a.cols() != d ||
        static_cast<std::size_t>(a.rows()) != stats.count) {
      throw InvalidArgument("low-rank factor shape does not match stats");
    }
  }
}

MomentAccumulator::Options MomentAccumulator::DefaultOptions(std::size_t dim) {
  return {.keep_comoment = dim <= kDenseThreshold,
          .keep_rows = dim > kDenseThreshold};
}

MomentAccumulator::MomentAccumulator(std::size_t dim)
    : MomentAccumulator(dim, DefaultOptions(dim)) {}

MomentAccumulator::MomentAccumulator(std::size_t dim, Options options)
    : dim_(dim), options_(options) {
  if (dim == 0) throw InvalidArgument("accumulator dimension must be positive");
  if (options_.keep_comoment && dim > kDenseThreshold) {
    throw RepresentationMismatch("dense co-moment requested for dimension " +
                                 std::to_string(dim));
  }
  const auto d = static_cast<Eigen::Index>(dim);
  mean_ = Eigen::VectorXd::Zero(d);
  if (options_.keep_comoment) comoment_ = Eigen::MatrixXd::Zero(d, d);
}

void MomentAccumulator::Add(std::span<const float> sample) {
  if (sample.size() != dim_) {
    throw DimensionMismatch("sample has " + std::to_string(sample.size()) +
                            " features, accumulator expects " +
                            std::to_string(dim_));
  }
  Eigen::VectorXd x(static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < dim_; ++i) x[static_cast<Eigen::Index>(i)] = sample[i];
  AddChecked(x);
}

void MomentAccumulator::Add(std::span<const double> sample) {
  if (sample.size() != dim_) {
    throw DimensionMismatch("sample has " + std::to_string(sample.size()) +
                            " features, accumulator expects " +
                            std::to_string(dim_));
  }
  AddChecked(Eigen::Map<const Eigen::VectorXd>(
      sample.data(), static_cast<Eigen::Index>(sample.size())));
}

void MomentAccumulator::AddChecked(const Eigen::VectorXd& x) {
  if (!x.allFinite()) throw NonFiniteSample("sample contains NaN or Inf");
  ++count_;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  if (options_.keep_comoment && count_ > 1) {
    const double n = static_cast<double>(count_);
    comoment_.selfadjointView<Eigen::Lower>().rankUpdate(delta, (n - 1.0) / n);
  }
  if (options_.keep_rows) rows_.insert(rows_.end(), x.data(), x.data() + x.size());
}

void MomentAccumulator::Merge(const MomentAccumulator& other) {
  if (other.dim_ != dim_) {
    throw DimensionMismatch("cannot merge accumulators of dimension " +
                            std::to_string(dim_) + " and " +
                            std::to_string(other.dim_));
  }
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  const Eigen::VectorXd delta = other.mean_ - mean_;

  options_.keep_comoment = options_.keep_comoment && other.options_.keep_comoment;
  options_.keep_rows = options_.keep_rows && other.options_.keep_rows;
  if (options_.keep_comoment) {
    comoment_ += other.comoment_;
    comoment_.selfadjointView<Eigen::Lower>().rankUpdate(delta, na * nb / n);
  } else {
    comoment_.resize(0, 0);
  }
  if (options_.keep_rows) {
    rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
  } else {
    rows_.clear();
    rows_.shrink_to_fit();
  }
  mean_ += delta * (nb / n);
  count_ += other.count_;
}

Eigen::MatrixXd MomentAccumulator::Comoment() const {
  if (!options_.keep_comoment) {
    throw InvalidArgument("accumulator does not keep a co-moment matrix");
  }
  return comoment_.selfadjointView<Eigen::Lower>();
}

GaussianStats Finalize(const MomentAccumulator& acc, CovarianceMode mode) {
  if (acc.count() < 2) {
    throw InsufficientSamples("covariance needs at least 2 samples, got " +
                              std::to_string(acc.count()));
  }
  if (mode == CovarianceMode::kAuto) {
    mode = acc.dim() <= kDenseThreshold ? CovarianceMode::kDense
                                        : CovarianceMode::kLowRank;
  }
  const auto n = static_cast<Eigen::Index>(acc.count());
  const auto d = static_cast<Eigen::Index>(acc.dim());
  const double inv_dof = 1.0 / static_cast<double>(acc.count() - 1);

  GaussianStats stats;
  stats.count = acc.count();
  stats.mean = acc.mean();

  if (mode == CovarianceMode::kDense) {
    if (acc.dim() > kDenseThreshold) {
      throw RepresentationMismatch(
          "dense covariance requested for dimension " + std::to_string(acc.dim()) +
          "; use the low-rank representation above " +
          std::to_string(kDenseThreshold));
    }
    if (acc.options().keep_comoment) {
      stats.covariance = DenseCovariance{acc.Comoment() * inv_dof};
      return stats;
    }
  } else if (!acc.options().keep_rows) {
    throw InvalidArgument(
        "low-rank representation needs an accumulator that keeps rows");
  }

  if (!acc.options().keep_rows) {
    throw InvalidArgument("accumulator keeps neither co-moment nor rows");
  }
  Eigen::Map<const RowMatrix> rows(acc.rows().data(), n, d);
  RowMatrix factor = (rows.rowwise() - acc.mean().transpose()) * std::sqrt(inv_dof);
  if (mode == CovarianceMode::kLowRank) {
    stats.covariance = LowRankFactor{std::move(factor)};
  } else {
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(factor.transpose());
    stats.covariance =
        DenseCovariance{Eigen::MatrixXd(sigma.selfadjointView<Eigen::Lower>())};
  }
  return stats;
}

}  // namespace cfid
