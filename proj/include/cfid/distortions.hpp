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

// Image distortions used to probe metric sensitivity: additive Gaussian noise,
// Gaussian blur, swirl warp and salt & pepper noise. Every distortion is the
// exact identity at alpha = 0 and a deterministic function of its inputs and
// seed.

#ifndef CFID_DISTORTIONS_HPP_
#define CFID_DISTORTIONS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfid/image.hpp"
#include "cfid/random.hpp"

namespace cfid {

enum class DistortionKind {
  kGaussianNoise,
  kGaussianBlur,
  kSpiralWarp,
  kSaltPepper,
};

std::string_view ToString(DistortionKind kind);
// Accepts the canonical names gaussian_noise, gaussian_blur, spiral_warp and
// salt_pepper plus the aliases noise, blur, swirl and sp.
DistortionKind ParseDistortionKind(std::string_view name);

struct PixelCoord {
  double x = 0.0;
  double y = 0.0;
};

inline constexpr double kDefaultSwirlRadius = 25.0;

struct DistortionSpec {
  DistortionKind kind = DistortionKind::kGaussianNoise;
  double alpha = 0.0;
  // Swirl only.
  double rho = kDefaultSwirlRadius;
  std::optional<PixelCoord> center{};
  // Stochastic kinds only.
  std::uint64_t seed = 0;
};

// Throws InvalidArgument if alpha < 0 (or non-finite), if salt & pepper or
// Gaussian noise has alpha > 1, or if a swirl has rho <= 0.
void Validate(const DistortionSpec& spec);

// Ordered distortion levels for one kind; strictly increasing, first is 0.
struct SweepGrid {
  DistortionKind kind;
  std::vector<double> alphas;
};

// The default sweep levels per kind:
//   noise {0, 0.05, 0.1, 0.2}, blur {0, 1, 2, 4}, swirl {0, 1, 2, 4},
//   salt & pepper {0, 0.1, 0.2, 0.3}.
SweepGrid DefaultSweepGrid(DistortionKind kind);
void Validate(const SweepGrid& grid);

// --- Gaussian noise --------------------------------------------------------

// Real-valued noise raster with the image's shape: i.i.d. standard normals
// min-max rescaled over the whole raster to exactly [0, 255].
std::vector<double> MakeNoiseRaster(std::size_t width, std::size_t height,
                                    RandomSource& rng);

// round((1 - alpha) * X + alpha * N), half away from zero, clamped to
// [0, 255]. `noise` holds one value per channel.
Image BlendNoise(const Image& image, std::span<const double> noise,
                 double alpha);

Image GaussianNoise(const Image& image, double alpha, RandomSource& rng);

// --- Gaussian blur ---------------------------------------------------------

// Normalized 1-D taps for offsets -R..R with R = ceil(4 * sigma). sigma = 0
// yields the single tap {1}.
std::vector<double> GaussianKernel(double sigma);

// Separable blur with the truncated, renormalized kernel above and
// reflect-101 borders (... c b | a b c d | c b ...).
Image GaussianBlur(const Image& image, double sigma);

// --- Swirl -----------------------------------------------------------------

// Default swirl center: (width / 2, height / 2) in integer division, which is
// the exact center pixel for odd sizes.
PixelCoord DefaultSwirlCenter(const Image& image);

// Source location sampled for output pixel `dest` (x = column, y = row):
//   r = |dest - center|, theta = atan2(dy, dx),
//   theta' = theta + alpha * exp(-5 r / (rho ln 2)),
//   source = center + r (cos theta', sin theta').
PixelCoord SwirlSource(PixelCoord dest, PixelCoord center, double alpha,
                       double rho);

// Bilinear sample of channel `c` at a real coordinate, clamping to the edge.
double SampleBilinear(const Image& image, double x, double y, std::size_t c);

Image SpiralWarp(const Image& image, double alpha, double rho,
                 std::optional<PixelCoord> center = std::nullopt);

// --- Salt & pepper ---------------------------------------------------------

// Each channel is selected with probability alpha; a selected channel becomes
// 0 or 255 with equal probability. Draw order: one uniform per channel, plus
// one coin flip for each selected channel, in memory order.
Image SaltPepper(const Image& image, double alpha, RandomSource& rng);

// --- Dispatch --------------------------------------------------------------

// Applies `spec` to one image using `spec.seed` directly.
Image Distort(const Image& image, const DistortionSpec& spec);

// Applies `spec` to every image; image i uses DeriveSeed(spec.seed, i).
ImageSet DistortSet(const ImageSet& set, const DistortionSpec& spec,
                    std::size_t threads = 1);

}  // namespace cfid

#endif  // CFID_DISTORTIONS_HPP_
