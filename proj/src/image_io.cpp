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

#include "cfid/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <set>
#include <utility>

#include "cfid/errors.hpp"
#include "cfid/parallel.hpp"

namespace cfid {
namespace {

namespace fs = std::filesystem;

std::vector<std::uint8_t> ReadFileBytes(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw IoError("cannot open '" + path.string() + "': not a regular file");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return bytes;
}

// ---------------------------------------------------------------------------
// PNG

struct PngReadState {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
  std::string error;
};

void PngError(png_structp png, png_const_charp message) {
  auto* state = static_cast<PngReadState*>(png_get_error_ptr(png));
  if (state != nullptr) state->error = message;
  png_longjmp(png, 1);
}

void PngWarning(png_structp, png_const_charp) {}

void PngReadCallback(png_structp png, png_bytep out, png_size_t length) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->offset + length > state->data.size()) {
    png_error(png, "unexpected end of PNG data");
  }
  std::memcpy(out, state->data.data() + state->offset, length);
  state->offset += length;
}

Image DecodePng(std::span<const std::uint8_t> bytes) {
  // Everything touched after setjmp lives behind these pointers so that a
  // longjmp leaves no half-updated automatic variables.
  auto state = std::make_unique<PngReadState>();
  state->data = bytes;
  auto pixels = std::make_unique<std::vector<std::uint8_t>>();
  auto rows = std::make_unique<std::vector<png_bytep>>();
  png_uint_32 width = 0;
  png_uint_32 height = 0;

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, state.get(),
                                           PngError, PngWarning);
  if (png == nullptr) throw DecodeError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DecodeError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("corrupt PNG: " + state->error);
  }

  png_set_read_fn(png, state.get(), PngReadCallback);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  // High byte of 16-bit samples.
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color_type == PNG_COLOR_TYPE_GRAY ||
      color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  if (png_get_channels(png, info) != 3 || png_get_bit_depth(png, info) != 8) {
    state->error = "unsupported PNG pixel layout";
    png_longjmp(png, 1);
  }
  const std::size_t stride = static_cast<std::size_t>(width) * 3;
  pixels->resize(stride * height);
  rows->resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    (*rows)[y] = pixels->data() + y * stride;
  }
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  return Image(width, height, std::move(*pixels));
}

void PngWriteCallback(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void PngFlushCallback(png_structp) {}

// ---------------------------------------------------------------------------
// JPEG

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void JpegErrorExit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void JpegSilence(j_common_ptr, int) {}

Image DecodeJpeg(std::span<const std::uint8_t> bytes) {
  auto cinfo = std::make_unique<jpeg_decompress_struct>();
  auto err = std::make_unique<JpegErrorManager>();
  auto pixels = std::make_unique<std::vector<std::uint8_t>>();

  cinfo->err = jpeg_std_error(&err->base);
  err->base.error_exit = JpegErrorExit;
  err->base.emit_message = JpegSilence;
  err->message[0] = '\0';
  if (setjmp(err->jump)) {
    jpeg_destroy_decompress(cinfo.get());
    throw DecodeError(std::string("corrupt JPEG: ") + err->message);
  }
  jpeg_create_decompress(cinfo.get());
  jpeg_mem_src(cinfo.get(), bytes.data(),
               static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(cinfo.get(), TRUE);
  if (cinfo->jpeg_color_space == JCS_CMYK ||
      cinfo->jpeg_color_space == JCS_YCCK) {
    std::strcpy(err->message, "CMYK JPEG is not supported");
    std::longjmp(err->jump, 1);
  }
  cinfo->out_color_space = JCS_RGB;
  jpeg_start_decompress(cinfo.get());
  const std::size_t stride = std::size_t{cinfo->output_width} * 3;
  pixels->resize(stride * cinfo->output_height);
  while (cinfo->output_scanline < cinfo->output_height) {
    JSAMPROW row = pixels->data() + cinfo->output_scanline * stride;
    jpeg_read_scanlines(cinfo.get(), &row, 1);
  }
  const std::size_t width = cinfo->output_width;
  const std::size_t height = cinfo->output_height;
  jpeg_finish_decompress(cinfo.get());
  jpeg_destroy_decompress(cinfo.get());
  return Image(width, height, std::move(*pixels));
}

bool HasImageExtension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

Image DecodeImage(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kPngSignature[8] = {0x89, 'P',  'N',  'G',
                                                    '\r', '\n', 0x1A, '\n'};
  if (bytes.size() >= 8 && std::equal(bytes.begin(), bytes.begin() + 8,
                                      std::begin(kPngSignature))) {
    return DecodePng(bytes);
  }
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 &&
      bytes[2] == 0xFF) {
    return DecodeJpeg(bytes);
  }
  throw DecodeError("unrecognized image format (expected PNG or JPEG)");
}

Image LoadImage(const fs::path& path) {
  const std::vector<std::uint8_t> bytes = ReadFileBytes(path);
  return DecodeImage(bytes);
}

std::vector<std::uint8_t> EncodePng(const Image& image) {
  if (image.empty()) throw InvalidArgument("cannot encode an empty image");
  std::vector<std::uint8_t> out;
  auto rows = std::make_unique<std::vector<png_bytep>>(image.height());
  // libpng takes non-const row pointers even when writing.
  auto* base = const_cast<std::uint8_t*>(image.pixels().data());
  for (std::size_t y = 0; y < image.height(); ++y) {
    (*rows)[y] = base + y * image.width() * 3;
  }

  auto state = std::make_unique<PngReadState>();
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, state.get(),
                                            PngError, PngWarning);
  if (png == nullptr) throw IoError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed: " + state->error);
  }
  png_set_write_fn(png, &out, PngWriteCallback, PngFlushCallback);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows->data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void SaveImage(const Image& image, const fs::path& path) {
  const std::vector<std::uint8_t> bytes = EncodePng(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<std::string> ListImageFiles(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw IoError("'" + dir.string() + "' is not a directory");
  }
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && HasImageExtension(entry.path())) {
      names.push_back(entry.path().filename().string());
    }
  }
  if (ec) throw IoError("cannot list '" + dir.string() + "': " + ec.message());
  std::sort(names.begin(), names.end());
  return names;
}

ImageSet LoadImageSet(const fs::path& dir, const LoadSetOptions& options) {
  std::vector<std::string> names = ListImageFiles(dir);
  if (names.empty()) {
    throw EmptySetError("no PNG or JPEG files in '" + dir.string() + "'");
  }
  if (options.max_images > 0 && names.size() > options.max_images) {
    names.resize(options.max_images);
  }

  ImageSet set;
  set.source_id = fs::canonical(dir).string();
  set.images.resize(names.size());
  ParallelFor(names.size(), options.threads, [&](std::size_t i) {
    try {
      set.images[i] = LoadImage(dir / names[i]);
    } catch (const DecodeError& e) {
      throw DecodeError(names[i] + ": " + e.what());
    } catch (const IoError& e) {
      throw IoError(names[i] + ": " + e.what());
    }
  });
  set.names = std::move(names);
  return set;
}

void SaveImageSet(const ImageSet& set, const fs::path& out_dir) {
  ValidateImageSet(set);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
  }
  std::set<std::string> written;
  for (std::size_t i = 0; i < set.size(); ++i) {
    std::string name;
    if (set.names.empty()) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%06zu.png", i);
      name = buf;
    } else {
      // PNG is the only output format; JPEG inputs keep their stem.
      fs::path p(set.names[i]);
      if (p.extension() != ".png") p.replace_extension(".png");
      name = p.string();
    }
    if (!written.insert(name).second) {
      throw InvalidArgument("two images map to output file '" + name + "'");
    }
    SaveImage(set.images[i], out_dir / name);
  }
}

}  // namespace cfid
