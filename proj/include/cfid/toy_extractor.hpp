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

#ifndef CFID_TOY_EXTRACTOR_HPP_
#define CFID_TOY_EXTRACTOR_HPP_

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "cfid/extractor.hpp"

namespace cfid {

// Model-free stand-in with the Inception tap dimensions. The input is
// preprocessed exactly like the real model's (299 x 299, [-1, 1], CHW) and
// multiplied by fixed sparse pseudorandom projections:
//
//   MaxPool1[j] = |sum_t w_jt * x[i_jt]|                      (341056 outputs)
//   MaxPool2[j] = |sum_t w_jt * x[i_jt]|                      (235200 outputs)
//   AvgPool[c]  = mean_s |sum_t w_cst * x[i_cst]|, s < 64      (2048 outputs)
//
// with kTaps = 8 taps per row, indices uniform over the input and weights
// N(0, 1) / sqrt(kTaps), drawn from RandomSource(kLevelSeeds[level]) in row
// order (index, then weight, per tap).
class ToyExtractor final : public Extractor {
 public:
  static constexpr std::string_view kId = "toy-v1";
  static constexpr std::size_t kTaps = 8;
  static constexpr std::size_t kPooledPositions = 64;
  static constexpr std::uint64_t kLevelSeeds[kLevelCount] = {
      0x746F792D6C310001ull, 0x746F792D6C320002ull, 0x746F792D6C330003ull};

  explicit ToyExtractor(std::size_t threads = 1);

  const ExtractorSpec& spec() const override { return spec_; }
  std::vector<ImageFeatures> ExtractBatch(
      std::span<const Image> images) const override;

 private:
  ExtractorSpec spec_;
  std::size_t threads_;
};

}  // namespace cfid

#endif  // CFID_TOY_EXTRACTOR_HPP_
