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

#ifndef CFID_IMAGE_HPP_
#define CFID_IMAGE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cfid {

// 8-bit interleaved RGB raster, row-major, origin top-left.
class Image {
 public:
  static constexpr std::size_t kChannels = 3;

  Image() = default;
  // Zero-filled image. Throws InvalidArgument for a zero dimension.
  Image(std::size_t width, std::size_t height);
  // Takes ownership of `pixels`, which must hold width * height * 3 bytes.
  Image(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t channel_count() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels_[(y * width_ + x) * kChannels + c];
  }
  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels_[(y * width_ + x) * kChannels + c];
  }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Ordered, non-empty collection of images plus the label they came from.
struct ImageSet {
  std::vector<Image> images;
  // File names parallel to `images`; empty for synthetic sets.
  std::vector<std::string> names;
  std::string source_id;

  std::size_t size() const noexcept { return images.size(); }
};

// Throws EmptySetError if the set has no images, InvalidArgument if `names`
// is non-empty but not parallel to `images`.
void ValidateImageSet(const ImageSet& set);

}  // namespace cfid

#endif  // CFID_IMAGE_HPP_
