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

#ifndef CFID_PIPELINE_HPP_
#define CFID_PIPELINE_HPP_

#include <cstddef>

#include "cfid/bundle.hpp"
#include "cfid/extractor.hpp"
#include "cfid/image.hpp"
#include "cfid/stats.hpp"

namespace cfid {

struct PipelineOptions {
  // Images handed to the extractor per call; does not affect results.
  std::size_t batch_size = 8;
  // Use only the first `max_samples` images; 0 uses all.
  std::size_t max_samples = 0;
  CovarianceMode mode = CovarianceMode::kAuto;
};

// Extracts every image (in set order), accumulates per-level moments and
// finalizes them. created_at is stamped with the current time.
StatsBundle ComputeBundle(const ImageSet& set, const Extractor& extractor,
                          const PipelineOptions& options = {});

}  // namespace cfid

#endif  // CFID_PIPELINE_HPP_
