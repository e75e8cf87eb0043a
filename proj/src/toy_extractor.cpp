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

#include "cfid/toy_extractor.hpp"

#include <cmath>

#include "cfid/parallel.hpp"
#include "cfid/random.hpp"

namespace cfid {
namespace {

constexpr std::size_t kInputDim =
    Image::kChannels * kInceptionInputSide * kInceptionInputSide;

struct SparseProjection {
  std::vector<std::uint32_t> index;
  std::vector<float> weight;

  SparseProjection(std::size_t rows, std::uint64_t seed) {
    const std::size_t n = rows * ToyExtractor::kTaps;
    index.resize(n);
    weight.resize(n);
    const double norm = 1.0 / std::sqrt(static_cast<double>(ToyExtractor::kTaps));
    RandomSource rng(seed);
    for (std::size_t k = 0; k < n; ++k) {
      index[k] = static_cast<std::uint32_t>(rng.UniformIndex(kInputDim));
      weight[k] = static_cast<float>(rng.Normal() * norm);
    }
  }

  double Row(std::size_t row, std::span<const float> x) const {
    double acc = 0.0;
    const std::size_t base = row * ToyExtractor::kTaps;
    for (std::size_t t = 0; t < ToyExtractor::kTaps; ++t) {
      acc += static_cast<double>(weight[base + t]) * x[index[base + t]];
    }
    return acc;
  }
};

struct Projections {
  SparseProjection level1;
  SparseProjection level2;
  SparseProjection level3;
};

const Projections& GetProjections() {
  static const Projections projections{
      SparseProjection(341056, ToyExtractor::kLevelSeeds[0]),
      SparseProjection(235200, ToyExtractor::kLevelSeeds[1]),
      SparseProjection(2048 * ToyExtractor::kPooledPositions,
                       ToyExtractor::kLevelSeeds[2]),
  };
  return projections;
}

ImageFeatures ExtractOne(const Image& image, const ExtractorSpec& spec) {
  const Projections& p = GetProjections();
  const std::vector<float> x = Preprocess(image, spec.input_side);

  ImageFeatures features;
  for (std::size_t l = 0; l < kLevelCount; ++l) {
    features[l].level_name = spec.levels[l].name;
    features[l].values.resize(spec.levels[l].flat_dim);
  }
  for (std::size_t j = 0; j < features[0].values.size(); ++j) {
    features[0].values[j] = static_cast<float>(std::abs(p.level1.Row(j, x)));
  }
  for (std::size_t j = 0; j < features[1].values.size(); ++j) {
    features[1].values[j] = static_cast<float>(std::abs(p.level2.Row(j, x)));
  }
  constexpr std::size_t kPositions = ToyExtractor::kPooledPositions;
  for (std::size_t c = 0; c < features[2].values.size(); ++c) {
    double acc = 0.0;
    for (std::size_t s = 0; s < kPositions; ++s) {
      acc += std::abs(p.level3.Row(c * kPositions + s, x));
    }
    features[2].values[c] = static_cast<float>(acc / kPositions);
  }
  return features;
}

}  // namespace

ToyExtractor::ToyExtractor(std::size_t threads)
    : spec_{std::string(kId), InceptionLevels(), kInceptionInputSide},
      threads_(threads) {}

std::vector<ImageFeatures> ToyExtractor::ExtractBatch(
    std::span<const Image> images) const {
  GetProjections();
  std::vector<ImageFeatures> out(images.size());
  ParallelFor(images.size(), threads_,
              [&](std::size_t i) { out[i] = ExtractOne(images[i], spec_); });
  return out;
}

}  // namespace cfid
