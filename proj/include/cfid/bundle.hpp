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

// On-disk statistics bundle.
//
//   <dir>/manifest.json
//   <dir>/<level>.mean.f64        D values
//   <dir>/<level>.cov.f64         D x D values     (dense_cov)
//   <dir>/<level>.factor.f64      N x D values     (lowrank_factor)
//
// Array files are raw little-endian IEEE-754 doubles, row-major, with no
// header. The manifest records format_version (1), extractor_id, source_id,
// created_at and, per level, name, dim, count, representation and each
// array's file name, shape and SHA-256.

#ifndef CFID_BUNDLE_HPP_
#define CFID_BUNDLE_HPP_

#include <array>
#include <filesystem>
#include <string>

#include "cfid/extractor.hpp"
#include "cfid/stats.hpp"

namespace cfid {

inline constexpr int kBundleFormatVersion = 1;
inline constexpr const char* kBundleManifestName = "manifest.json";

struct LevelStats {
  std::string name;
  GaussianStats stats;
};

struct StatsBundle {
  std::string extractor_id;
  std::string source_id;
  // ISO-8601 UTC, e.g. 2024-01-31T12:00:00Z.
  std::string created_at;
  std::array<LevelStats, kLevelCount> levels;
};

std::string CurrentUtcTimestamp();

// Throws ShapeMismatch if level names or dims disagree with `spec`.
void CheckBundleMatches(const StatsBundle& bundle, const ExtractorSpec& spec);

// Writes arrays first and the manifest last. Throws IoError.
void SaveBundle(const StatsBundle& bundle, const std::filesystem::path& dir);

// Throws IoError (missing or malformed files), FormatVersionError (unknown
// format_version) or ChecksumError (array bytes disagree with the manifest).
StatsBundle LoadBundle(const std::filesystem::path& dir);

// True if `path` is a directory containing a bundle manifest.
bool IsBundleDirectory(const std::filesystem::path& path);

}  // namespace cfid

#endif  // CFID_BUNDLE_HPP_
