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

#include "cfid/image.hpp"

#include <utility>

#include "cfid/errors.hpp"

namespace cfid {

Image::Image(std::size_t width, std::size_t height)
    : Image(width, height,
            std::vector<std::uint8_t>(width * height * kChannels, 0)) {}

Image::Image(std::size_t width, std::size_t height,
             std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width == 0 || height == 0) {
    throw InvalidArgument("image dimensions must be positive");
  }
  if (pixels_.size() != width * height * kChannels) {
    throw InvalidArgument("pixel buffer has " + std::to_string(pixels_.size()) +
                          " bytes, expected " +
                          std::to_string(width * height * kChannels));
  }
}

void ValidateImageSet(const ImageSet& set) {
  if (set.images.empty()) {
    throw EmptySetError("image set '" + set.source_id + "' is empty");
  }
  if (!set.names.empty() && set.names.size() != set.images.size()) {
    throw InvalidArgument("image set names are not parallel to its images");
  }
}

}  // namespace cfid
