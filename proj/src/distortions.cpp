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

#include "cfid/distortions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cfid/errors.hpp"
#include "cfid/parallel.hpp"

namespace cfid {
namespace {

std::uint8_t QuantizeChannel(double v) {
  // std::round rounds half away from zero.
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

// Reflect-101 border: for n = 5, index -2 -> 2, -1 -> 1, 5 -> 3, 6 -> 2.
std::size_t Reflect101(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= n) i = period - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

std::string_view ToString(DistortionKind kind) {
  switch (kind) {
    case DistortionKind::kGaussianNoise:
      return "gaussian_noise";
    case DistortionKind::kGaussianBlur:
      return "gaussian_blur";
    case DistortionKind::kSpiralWarp:
      return "spiral_warp";
    case DistortionKind::kSaltPepper:
      return "salt_pepper";
  }
  return "unknown";
}

DistortionKind ParseDistortionKind(std::string_view name) {
  if (name == "gaussian_noise" || name == "noise") {
    return DistortionKind::kGaussianNoise;
  }
  if (name == "gaussian_blur" || name == "blur") {
    return DistortionKind::kGaussianBlur;
  }
  if (name == "spiral_warp" || name == "swirl") {
    return DistortionKind::kSpiralWarp;
  }
  if (name == "salt_pepper" || name == "sp") {
    return DistortionKind::kSaltPepper;
  }
  throw InvalidArgument("unknown distortion kind '" + std::string(name) + "'");
}

void Validate(const DistortionSpec& spec) {
  if (!std::isfinite(spec.alpha) || spec.alpha < 0.0) {
    throw InvalidArgument("distortion alpha must be finite and >= 0");
  }
  switch (spec.kind) {
    case DistortionKind::kGaussianNoise:
    case DistortionKind::kSaltPepper:
      if (spec.alpha > 1.0) {
        throw InvalidArgument(std::string(ToString(spec.kind)) +
                              " requires alpha in [0, 1]");
      }
      break;
    case DistortionKind::kSpiralWarp:
      if (!std::isfinite(spec.rho) || spec.rho <= 0.0) {
        throw InvalidArgument("spiral_warp requires rho > 0");
      }
      break;
    case DistortionKind::kGaussianBlur:
      break;
  }
}

SweepGrid DefaultSweepGrid(DistortionKind kind) {
  switch (kind) {
    case DistortionKind::kGaussianNoise:
      return {kind, {0.0, 0.05, 0.1, 0.2}};
    case DistortionKind::kGaussianBlur:
    case DistortionKind::kSpiralWarp:
      return {kind, {0.0, 1.0, 2.0, 4.0}};
    case DistortionKind::kSaltPepper:
      return {kind, {0.0, 0.1, 0.2, 0.3}};
  }
  throw InvalidArgument("unknown distortion kind");
}

void Validate(const SweepGrid& grid) {
  if (grid.alphas.empty() || grid.alphas.front() != 0.0) {
    throw InvalidArgument("sweep alphas must start at 0");
  }
  for (std::size_t i = 1; i < grid.alphas.size(); ++i) {
    if (!(grid.alphas[i] > grid.alphas[i - 1])) {
      throw InvalidArgument("sweep alphas must be strictly increasing");
    }
  }
  for (double alpha : grid.alphas) {
    Validate(DistortionSpec{.kind = grid.kind, .alpha = alpha});
  }
}

std::vector<double> MakeNoiseRaster(std::size_t width, std::size_t height,
                                    RandomSource& rng) {
  std::vector<double> noise(width * height * Image::kChannels);
  for (double& v : noise) v = rng.Normal();
  const auto [lo, hi] = std::minmax_element(noise.begin(), noise.end());
  const double min = *lo;
  const double range = *hi - *lo;
  for (double& v : noise) {
    v = range > 0.0 ? (v - min) * (255.0 / range) : 127.5;
  }
  return noise;
}

Image BlendNoise(const Image& image, std::span<const double> noise,
                 double alpha) {
  if (noise.size() != image.channel_count()) {
    throw DimensionMismatch("noise raster size does not match image");
  }
  Image out = image;
  auto src = image.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = QuantizeChannel((1.0 - alpha) * src[i] + alpha * noise[i]);
  }
  return out;
}

Image GaussianNoise(const Image& image, double alpha, RandomSource& rng) {
  Validate({.kind = DistortionKind::kGaussianNoise, .alpha = alpha});
  if (alpha == 0.0) return image;
  const std::vector<double> noise =
      MakeNoiseRaster(image.width(), image.height(), rng);
  return BlendNoise(image, noise, alpha);
}

std::vector<double> GaussianKernel(double sigma) {
  if (!std::isfinite(sigma) || sigma < 0.0) {
    throw InvalidArgument("blur sigma must be finite and >= 0");
  }
  if (sigma == 0.0) return {1.0};
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double w = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(k + radius)] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

Image GaussianBlur(const Image& image, double sigma) {
  const std::vector<double> taps = GaussianKernel(sigma);
  if (taps.size() == 1) return image;
  const auto radius = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const auto w = static_cast<std::ptrdiff_t>(image.width());
  const auto h = static_cast<std::ptrdiff_t>(image.height());
  constexpr std::size_t kC = Image::kChannels;

  std::vector<double> horizontal(image.channel_count());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < kC; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
          acc += taps[static_cast<std::size_t>(k + radius)] *
                 image.at(Reflect101(x + k, w), static_cast<std::size_t>(y), c);
        }
        horizontal[(static_cast<std::size_t>(y * w + x)) * kC + c] = acc;
      }
    }
  }

  Image out(image.width(), image.height());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < kC; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
          const std::size_t row = Reflect101(y + k, h);
          acc += taps[static_cast<std::size_t>(k + radius)] *
                 horizontal[(row * static_cast<std::size_t>(w) +
                             static_cast<std::size_t>(x)) * kC + c];
        }
        out.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), c) =
            QuantizeChannel(acc);
      }
    }
  }
  return out;
}

PixelCoord DefaultSwirlCenter(const Image& image) {
  return {static_cast<double>(image.width() / 2),
          static_cast<double>(image.height() / 2)};
}

PixelCoord SwirlSource(PixelCoord dest, PixelCoord center, double alpha,
                       double rho) {
  const double dx = dest.x - center.x;
  const double dy = dest.y - center.y;
  const double r = std::sqrt(dx * dx + dy * dy);
  const double theta = std::atan2(dy, dx);
  const double rotated =
      theta + alpha * std::exp(-5.0 * r / (rho * std::numbers::ln2));
  return {center.x + r * std::cos(rotated), center.y + r * std::sin(rotated)};
}

double SampleBilinear(const Image& image, double x, double y, std::size_t c) {
  const double max_x = static_cast<double>(image.width() - 1);
  const double max_y = static_cast<double>(image.height() - 1);
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x1 = std::min(x0 + 1, image.width() - 1);
  const std::size_t y1 = std::min(y0 + 1, image.height() - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double top = (1.0 - fx) * image.at(x0, y0, c) + fx * image.at(x1, y0, c);
  const double bottom =
      (1.0 - fx) * image.at(x0, y1, c) + fx * image.at(x1, y1, c);
  return (1.0 - fy) * top + fy * bottom;
}

Image SpiralWarp(const Image& image, double alpha, double rho,
                 std::optional<PixelCoord> center) {
  Validate({.kind = DistortionKind::kSpiralWarp, .alpha = alpha, .rho = rho});
  if (alpha == 0.0) return image;
  const PixelCoord c0 = center.value_or(DefaultSwirlCenter(image));
  Image out(image.width(), image.height());
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) {
      const PixelCoord src =
          SwirlSource({static_cast<double>(x), static_cast<double>(y)}, c0,
                      alpha, rho);
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        out.at(x, y, c) = QuantizeChannel(SampleBilinear(image, src.x, src.y, c));
      }
    }
  }
  return out;
}

Image SaltPepper(const Image& image, double alpha, RandomSource& rng) {
  Validate({.kind = DistortionKind::kSaltPepper, .alpha = alpha});
  if (alpha == 0.0) return image;
  Image out = image;
  for (std::uint8_t& v : out.pixels()) {
    if (rng.Uniform() < alpha) v = rng.CoinFlip() ? 255 : 0;
  }
  return out;
}

Image Distort(const Image& image, const DistortionSpec& spec) {
  Validate(spec);
  switch (spec.kind) {
    case DistortionKind::kGaussianNoise: {
      RandomSource rng(spec.seed);
      return GaussianNoise(image, spec.alpha, rng);
    }
    case DistortionKind::kGaussianBlur:
      return GaussianBlur(image, spec.alpha);
    case DistortionKind::kSpiralWarp:
      return SpiralWarp(image, spec.alpha, spec.rho, spec.center);
    case DistortionKind::kSaltPepper: {
      RandomSource rng(spec.seed);
      return SaltPepper(image, spec.alpha, rng);
    }
  }
  throw InvalidArgument("unknown distortion kind");
}

ImageSet DistortSet(const ImageSet& set, const DistortionSpec& spec,
                    std::size_t threads) {
  ValidateImageSet(set);
  Validate(spec);
  ImageSet out;
  out.names = set.names;
  out.source_id = set.source_id;
  out.images.resize(set.size());
  ParallelFor(set.size(), threads, [&](std::size_t i) {
    DistortionSpec per_image = spec;
    per_image.seed = DeriveSeed(spec.seed, i);
    out.images[i] = Distort(set.images[i], per_image);
  });
  return out;
}

}  // namespace cfid
