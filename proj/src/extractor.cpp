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

#include "cfid/extractor.hpp"

#include <algorithm>
#include <cmath>

#include "cfid/errors.hpp"

namespace cfid {
namespace {

struct AxisSample {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

std::vector<AxisSample> AxisSamples(std::size_t in, std::size_t out) {
  std::vector<AxisSample> samples(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double max_src = static_cast<double>(in - 1);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, max_src);
    const auto lo = static_cast<std::size_t>(std::floor(src));
    samples[d] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return samples;
}

}  // namespace

std::array<LevelSpec, kLevelCount> InceptionLevels() {
  return {{
      {"MaxPool1", 64, 73, 73, 341056},
      {"MaxPool2", 192, 35, 35, 235200},
      {"AvgPool", 2048, 1, 1, 2048},
  }};
}

void Validate(const ExtractorSpec& spec) {
  for (const LevelSpec& level : spec.levels) {
    if (level.flat_dim == 0 ||
        level.flat_dim != level.channels * level.height * level.width) {
      throw ShapeMismatch("level " + level.name + " has flat_dim " +
                          std::to_string(level.flat_dim) +
                          " inconsistent with its shape");
    }
  }
  if (spec.input_side == 0) throw ShapeMismatch("input side must be positive");
}

std::vector<double> ResizeBilinearPlanar(const Image& image,
                                         std::size_t out_width,
                                         std::size_t out_height) {
  if (image.empty() || out_width == 0 || out_height == 0) {
    throw InvalidArgument("resize needs a non-empty image and target");
  }
  const std::vector<AxisSample> xs = AxisSamples(image.width(), out_width);
  const std::vector<AxisSample> ys = AxisSamples(image.height(), out_height);
  const std::size_t plane = out_width * out_height;
  std::vector<double> out(plane * Image::kChannels);
  for (std::size_t c = 0; c < Image::kChannels; ++c) {
    for (std::size_t y = 0; y < out_height; ++y) {
      const AxisSample& sy = ys[y];
      for (std::size_t x = 0; x < out_width; ++x) {
        const AxisSample& sx = xs[x];
        const double top = (1.0 - sx.frac) * image.at(sx.lo, sy.lo, c) +
                           sx.frac * image.at(sx.hi, sy.lo, c);
        const double bottom = (1.0 - sx.frac) * image.at(sx.lo, sy.hi, c) +
                              sx.frac * image.at(sx.hi, sy.hi, c);
        out[c * plane + y * out_width + x] =
            (1.0 - sy.frac) * top + sy.frac * bottom;
      }
    }
  }
  return out;
}

std::vector<float> Preprocess(const Image& image, std::size_t side) {
  const std::vector<double> resized = ResizeBilinearPlanar(image, side, side);
  std::vector<float> tensor(resized.size());
  for (std::size_t i = 0; i < resized.size(); ++i) {
    tensor[i] = static_cast<float>(resized[i] / 127.5 - 1.0);
  }
  return tensor;
}

ImageFeatures Extractor::Extract(const Image& image) const {
  std::vector<ImageFeatures> batch = ExtractBatch(std::span(&image, 1));
  return std::move(batch.front());
}

void CheckFeatures(const ImageFeatures& features, const ExtractorSpec& spec) {
  for (std::size_t l = 0; l < kLevelCount; ++l) {
    const LevelActivations& level = features[l];
    if (level.values.size() != spec.levels[l].flat_dim) {
      throw ShapeMismatch("level " + spec.levels[l].name + " produced " +
                          std::to_string(level.values.size()) +
                          " values, expected " +
                          std::to_string(spec.levels[l].flat_dim));
    }
    for (float v : level.values) {
      if (!std::isfinite(v)) {
        throw NonFiniteSample("level " + spec.levels[l].name +
                              " produced a non-finite activation");
      }
    }
  }
}

}  // namespace cfid
