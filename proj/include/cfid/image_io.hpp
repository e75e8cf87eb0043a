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

#ifndef CFID_IMAGE_IO_HPP_
#define CFID_IMAGE_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cfid/image.hpp"

namespace cfid {

// Decodes a PNG or JPEG file (detected by signature, not extension) to 8-bit
// RGB. Grayscale is replicated across channels, alpha is dropped, palettes
// are expanded and 16-bit samples keep their high byte.
// Throws IoError if the file cannot be read, DecodeError if it is not a
// supported or intact image.
Image LoadImage(const std::filesystem::path& path);
Image DecodeImage(std::span<const std::uint8_t> bytes);

// Writes an 8-bit RGB PNG. Output bytes are a pure function of the image.
void SaveImage(const Image& image, const std::filesystem::path& path);
std::vector<std::uint8_t> EncodePng(const Image& image);

// File names in `dir` with a .png/.jpg/.jpeg extension (any case), sorted
// bytewise.
std::vector<std::string> ListImageFiles(const std::filesystem::path& dir);

struct LoadSetOptions {
  // Keep only the first `max_images` files in sorted order; 0 keeps all.
  std::size_t max_images = 0;
  std::size_t threads = 1;
};

// Loads every image file in `dir` in sorted filename order. The source id is
// the canonical directory path. Per-file failures are rethrown with the file
// name prefixed to the message.
ImageSet LoadImageSet(const std::filesystem::path& dir,
                      const LoadSetOptions& options = {});

// Writes each image as <out_dir>/<name>. Names default to 000000.png, ...
void SaveImageSet(const ImageSet& set, const std::filesystem::path& out_dir);

}  // namespace cfid

#endif  // CFID_IMAGE_IO_HPP_
