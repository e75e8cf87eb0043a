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

#include "cfid/pipeline.hpp"

#include <algorithm>
#include <span>
#include <vector>

#include "cfid/errors.hpp"

namespace cfid {
namespace {

MomentAccumulator::Options AccumulatorOptionsFor(std::size_t dim,
                                                 CovarianceMode mode) {
  switch (mode) {
    case CovarianceMode::kAuto:
      return MomentAccumulator::DefaultOptions(dim);
    case CovarianceMode::kDense:
      if (dim > kDenseThreshold) {
        throw RepresentationMismatch(
            "dense mode requested but a level has dimension " +
            std::to_string(dim) + " > " + std::to_string(kDenseThreshold));
      }
      return {.keep_comoment = true, .keep_rows = false};
    case CovarianceMode::kLowRank:
      return {.keep_comoment = false, .keep_rows = true};
  }
  throw InvalidArgument("unknown covariance mode");
}

}  // namespace

StatsBundle ComputeBundle(const ImageSet& set, const Extractor& extractor,
                          const PipelineOptions& options) {
  ValidateImageSet(set);
  const ExtractorSpec& spec = extractor.spec();
  Validate(spec);
  const std::size_t batch = std::max<std::size_t>(options.batch_size, 1);
  std::size_t n = set.size();
  if (options.max_samples > 0) n = std::min(n, options.max_samples);
  if (n < 2) {
    throw InsufficientSamples("need at least 2 images to estimate a covariance, got " +
                              std::to_string(n));
  }

  std::vector<MomentAccumulator> accumulators;
  accumulators.reserve(kLevelCount);
  for (const LevelSpec& level : spec.levels) {
    accumulators.emplace_back(level.flat_dim,
                              AccumulatorOptionsFor(level.flat_dim, options.mode));
  }

  const std::span<const Image> images(set.images.data(), n);
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t len = std::min(batch, n - start);
    const std::vector<ImageFeatures> features =
        extractor.ExtractBatch(images.subspan(start, len));
    for (const ImageFeatures& f : features) {
      CheckFeatures(f, spec);
      for (std::size_t l = 0; l < kLevelCount; ++l) {
        accumulators[l].Add(std::span<const float>(f[l].values));
      }
    }
  }

  StatsBundle bundle;
  bundle.extractor_id = spec.extractor_id;
  bundle.source_id = set.source_id;
  bundle.created_at = CurrentUtcTimestamp();
  for (std::size_t l = 0; l < kLevelCount; ++l) {
    bundle.levels[l].name = spec.levels[l].name;
    bundle.levels[l].stats = Finalize(accumulators[l], options.mode);
    // Drop retained rows before finalizing the next level.
    accumulators[l] = MomentAccumulator(1);
  }
  return bundle;
}

}  // namespace cfid
