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

#ifndef CFID_RANDOM_HPP_
#define CFID_RANDOM_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace cfid {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t SplitMix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Seed for the `index`-th independent stream under `seed`.
constexpr std::uint64_t DeriveSeed(std::uint64_t seed,
                                   std::uint64_t index) noexcept {
  return SplitMix64(seed ^ SplitMix64(index));
}

// Seeded pseudorandom stream. The integer stream is std::mt19937_64, whose
// output for a given seed is fixed by the C++ standard. Uniform doubles use
// the top 53 bits; normals use Box-Muller, so their last bit depends on the
// platform's log/cos/sin.
class RandomSource {
 public:
  static constexpr std::string_view kAlgorithmId = "mt19937_64/u53/box-muller";

  explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::string_view algorithm_id() const noexcept { return kAlgorithmId; }

  std::uint64_t NextU64() { return engine_(); }
  // Uniform in [0, 1).
  double Uniform();
  // Uniform integer in [0, bound), bound > 0.
  std::uint64_t UniformIndex(std::uint64_t bound);
  double Normal();
  bool CoinFlip() { return (engine_() >> 63) != 0; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cfid

#endif  // CFID_RANDOM_HPP_
