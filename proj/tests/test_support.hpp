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

// Fixtures shared by the unit and acceptance suites.

#ifndef CFID_TESTS_TEST_SUPPORT_HPP_
#define CFID_TESTS_TEST_SUPPORT_HPP_

#include <stdlib.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cfid/extractor.hpp"
#include "cfid/image.hpp"
#include "cfid/random.hpp"
#include "cfid/stats.hpp"

namespace cfid::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "cfid-test-XXXXXX").string();
    if (mkdtemp(pattern.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// N x D samples x = mu + z * L with z standard normal and L a random D x D
// mixing matrix of rank min(D, mix_rank), so covariances are anisotropic.
inline RowMatrix RandomSamples(std::size_t n, std::size_t d, std::uint64_t seed,
                               double mean_scale = 1.0, std::size_t mix_rank = 0) {
  RandomSource rng(seed);
  const std::size_t k = mix_rank == 0 ? d : std::min(mix_rank, d);
  Eigen::MatrixXd mix(k, d);
  for (Eigen::Index i = 0; i < mix.size(); ++i) mix.data()[i] = rng.Normal() / std::sqrt(double(k));
  Eigen::RowVectorXd mu(d);
  for (Eigen::Index i = 0; i < mu.size(); ++i) mu[i] = mean_scale * rng.Normal();
  Eigen::MatrixXd z(n, k);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.Normal();
  RowMatrix x = z * mix;
  x.rowwise() += mu;
  return x;
}

inline MomentAccumulator Accumulate(const RowMatrix& samples, MomentAccumulator::Options options) {
  MomentAccumulator acc(static_cast<std::size_t>(samples.cols()), options);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    acc.Add(std::span<const double>(samples.row(i).data(), static_cast<std::size_t>(samples.cols())));
  }
  return acc;
}

inline GaussianStats StatsOf(const RowMatrix& samples, CovarianceMode mode) {
  const bool dense = mode == CovarianceMode::kDense;
  return Finalize(Accumulate(samples, {.keep_comoment = dense, .keep_rows = !dense}), mode);
}

// Two-pass batch oracle: mean and (N-1)-normalized covariance.
struct BatchMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline BatchMoments TwoPass(const RowMatrix& x) {
  BatchMoments m;
  const double n = static_cast<double>(x.rows());
  m.mean = Eigen::VectorXd::Zero(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) m.mean += x.row(i).transpose();
  m.mean /= n;
  m.cov = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd c = x.row(i).transpose() - m.mean;
    m.cov += c * c.transpose();
  }
  m.cov /= (n - 1.0);
  return m;
}

inline double RelDiff(double a, double b) {
  return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)});
}

// Smooth random "photograph": bilinear upsampling of a coarse random grid,
// a random linear gradient, and mild per-pixel grain.
inline Image SyntheticPhoto(std::size_t width, std::size_t height, std::uint64_t seed) {
  RandomSource rng(seed);
  constexpr std::size_t kGrid = 6;
  double grid[kGrid][kGrid][3];
  for (auto& row : grid) {
    for (auto& cell : row) {
      for (double& v : cell) v = 40.0 + 175.0 * rng.Uniform();
    }
  }
  const double gx = 60.0 * (rng.Uniform() - 0.5), gy = 60.0 * (rng.Uniform() - 0.5);
  Image img(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double u = double(x) / double(width - 1) * (kGrid - 1);
      const double v = double(y) / double(height - 1) * (kGrid - 1);
      const auto i0 = std::min<std::size_t>(static_cast<std::size_t>(u), kGrid - 2);
      const auto j0 = std::min<std::size_t>(static_cast<std::size_t>(v), kGrid - 2);
      const double fu = u - double(i0), fv = v - double(j0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = (1 - fu) * grid[j0][i0][c] + fu * grid[j0][i0 + 1][c];
        const double bot = (1 - fu) * grid[j0 + 1][i0][c] + fu * grid[j0 + 1][i0 + 1][c];
        double val = (1 - fv) * top + fv * bot;
        val += gx * (double(x) / double(width) - 0.5) + gy * (double(y) / double(height) - 0.5);
        val += 6.0 * rng.Normal();
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::round(val), 0.0, 255.0));
      }
    }
  }
  return img;
}

inline ImageSet SyntheticPhotoSet(std::size_t n, std::size_t width, std::size_t height,
                                  std::uint64_t seed) {
  ImageSet set;
  set.source_id = "synthetic:" + std::to_string(seed);
  for (std::size_t i = 0; i < n; ++i) {
    set.images.push_back(SyntheticPhoto(width, height, DeriveSeed(seed, i)));
    char name[32];
    std::snprintf(name, sizeof(name), "img%04zu.png", i);
    set.names.emplace_back(name);
  }
  return set;
}

inline Image RandomImage(std::size_t width, std::size_t height, std::uint64_t seed) {
  RandomSource rng(seed);
  Image img(width, height);
  for (std::uint8_t& v : img.pixels()) v = static_cast<std::uint8_t>(rng.UniformIndex(256));
  return img;
}

// Small deterministic extractor: per-channel block means of the image at
// three granularities. Cheap enough for many-sample tests.
class BlockExtractor final : public Extractor {
 public:
  explicit BlockExtractor(std::string id = "block-test") {
    spec_.extractor_id = std::move(id);
    spec_.levels = {{{"MaxPool1", 3, 4, 4, 48}, {"MaxPool2", 3, 2, 2, 12}, {"AvgPool", 3, 1, 1, 3}}};
  }
  const ExtractorSpec& spec() const override { return spec_; }
  std::vector<ImageFeatures> ExtractBatch(std::span<const Image> images) const override {
    std::vector<ImageFeatures> out;
    for (const Image& img : images) {
      ImageFeatures f;
      for (std::size_t l = 0; l < kLevelCount; ++l) {
        const std::size_t g = spec_.levels[l].height;
        f[l].level_name = spec_.levels[l].name;
        f[l].values.assign(spec_.levels[l].flat_dim, 0.0f);
        std::vector<double> count(g * g, 0.0);
        for (std::size_t y = 0; y < img.height(); ++y) {
          for (std::size_t x = 0; x < img.width(); ++x) {
            const std::size_t cell = (y * g / img.height()) * g + x * g / img.width();
            count[cell] += 1;
            for (std::size_t c = 0; c < 3; ++c) {
              f[l].values[c * g * g + cell] += static_cast<float>(img.at(x, y, c));
            }
          }
        }
        for (std::size_t c = 0; c < 3; ++c) {
          for (std::size_t k = 0; k < g * g; ++k) {
            f[l].values[c * g * g + k] /= static_cast<float>(count[k]);
          }
        }
      }
      out.push_back(std::move(f));
    }
    return out;
  }

 private:
  ExtractorSpec spec_;
};

}  // namespace cfid::testing

#endif  // CFID_TESTS_TEST_SUPPORT_HPP_
