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

#ifndef CFID_EXTRACTOR_HPP_
#define CFID_EXTRACTOR_HPP_

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cfid/image.hpp"

namespace cfid {

// One feature tap. Activations are flattened channel-major, then row-major
// over the spatial grid, so flat_dim = channels * height * width.
struct LevelSpec {
  std::string name;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t flat_dim = 0;

  friend bool operator==(const LevelSpec&, const LevelSpec&) = default;
};

inline constexpr std::size_t kLevelCount = 3;
inline constexpr std::size_t kInceptionInputSide = 299;

struct ExtractorSpec {
  // SHA-256 of the model file, or a fixed name for built-in extractors.
  std::string extractor_id;
  std::array<LevelSpec, kLevelCount> levels;
  std::size_t input_side = kInceptionInputSide;
};

// The three Inception-V3 taps:
//   MaxPool1 (64, 73, 73) = 341056, MaxPool2 (192, 35, 35) = 235200,
//   AvgPool (2048, 1, 1) = 2048.
std::array<LevelSpec, kLevelCount> InceptionLevels();

// Throws ShapeMismatch unless every flat_dim equals its shape product.
void Validate(const ExtractorSpec& spec);

struct LevelActivations {
  std::string level_name;
  std::vector<float> values;
};

using ImageFeatures = std::array<LevelActivations, kLevelCount>;

// Bilinear resize with half-pixel centers (src = (dst + 0.5) * in / out - 0.5,
// clamped to the valid range). Returns a planar CHW tensor of channel values
// in [0, 255].
std::vector<double> ResizeBilinearPlanar(const Image& image,
                                         std::size_t out_width,
                                         std::size_t out_height);

// Resize to side x side and map channel values v -> v / 127.5 - 1, CHW order.
std::vector<float> Preprocess(const Image& image, std::size_t side);

// Multi-level feature extractor. Implementations are immutable after
// construction and safe to call concurrently.
class Extractor {
 public:
  virtual ~Extractor() = default;

  virtual const ExtractorSpec& spec() const = 0;

  // Features for each image, in input order. Results do not depend on how
  // images are grouped into calls.
  virtual std::vector<ImageFeatures> ExtractBatch(
      std::span<const Image> images) const = 0;

  ImageFeatures Extract(const Image& image) const;

  const std::string& id() const { return spec().extractor_id; }
};

// Throws ShapeMismatch if lengths disagree with `spec`, NonFiniteSample if any
// value is NaN or infinite.
void CheckFeatures(const ImageFeatures& features, const ExtractorSpec& spec);

}  // namespace cfid

#endif  // CFID_EXTRACTOR_HPP_
