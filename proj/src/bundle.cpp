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

#include "cfid/bundle.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <vector>

#include "cfid/errors.hpp"
#include "cfid/hash.hpp"

namespace cfid {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<std::uint8_t> EncodeLittleEndian(const double* data, std::size_t n) {
  std::vector<std::uint8_t> bytes(n * 8);
  for (std::size_t i = 0; i < n; ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(data[i]);
    for (int b = 0; b < 8; ++b) {
      bytes[i * 8 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
  }
  return bytes;
}

void DecodeLittleEndian(std::span<const std::uint8_t> bytes, double* out) {
  const std::size_t n = bytes.size() / 8;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
}

json WriteArray(const fs::path& dir, const std::string& file,
                const double* data, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  const std::vector<std::uint8_t> bytes = EncodeLittleEndian(data, n);
  const fs::path path = dir / file;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
  return {{"file", file}, {"shape", shape}, {"sha256", Sha256Hex(bytes)}};
}

// Reads and verifies one array entry; returns its values.
std::vector<double> ReadArray(const fs::path& dir, const json& entry,
                              std::size_t expected_count) {
  const std::string file = entry.at("file").get<std::string>();
  if (file.find('/') != std::string::npos || file.find("..") != std::string::npos) {
    throw IoError("bundle array name '" + file + "' is not a plain file name");
  }
  const fs::path path = dir / file;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open bundle array '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  if (Sha256Hex(bytes) != entry.at("sha256").get<std::string>()) {
    throw ChecksumError("bundle array '" + file + "' fails its SHA-256 check");
  }
  std::size_t shape_count = 1;
  for (std::size_t s : entry.at("shape").get<std::vector<std::size_t>>()) {
    shape_count *= s;
  }
  if (shape_count != expected_count || bytes.size() != expected_count * 8) {
    throw IoError("bundle array '" + file + "' has an unexpected size");
  }
  std::vector<double> values(expected_count);
  DecodeLittleEndian(bytes, values.data());
  return values;
}

}  // namespace

std::string CurrentUtcTimestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

void CheckBundleMatches(const StatsBundle& bundle, const ExtractorSpec& spec) {
  for (std::size_t l = 0; l < kLevelCount; ++l) {
    const LevelStats& level = bundle.levels[l];
    if (level.name != spec.levels[l].name ||
        level.stats.dim() != spec.levels[l].flat_dim) {
      throw ShapeMismatch("bundle level " + std::to_string(l) + " (" +
                          level.name + ", dim " +
                          std::to_string(level.stats.dim()) +
                          ") does not match extractor level " +
                          spec.levels[l].name + " (dim " +
                          std::to_string(spec.levels[l].flat_dim) + ")");
    }
  }
}

void SaveBundle(const StatsBundle& bundle, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  json levels = json::array();
  for (const LevelStats& level : bundle.levels) {
    Validate(level.stats);
    const GaussianStats& s = level.stats;
    const std::size_t d = s.dim();
    json arrays;
    arrays["mean"] = WriteArray(dir, level.name + ".mean.f64", s.mean.data(), {d});
    if (const auto* dense = std::get_if<DenseCovariance>(&s.covariance)) {
      // Symmetric, so column-major storage is also row-major.
      arrays["covariance"] =
          WriteArray(dir, level.name + ".cov.f64", dense->matrix.data(), {d, d});
    } else {
      const RowMatrix& a = std::get<LowRankFactor>(s.covariance).factor;
      arrays["factor"] = WriteArray(dir, level.name + ".factor.f64", a.data(),
                                    {static_cast<std::size_t>(a.rows()), d});
    }
    levels.push_back({{"name", level.name},
                      {"dim", d},
                      {"count", s.count},
                      {"representation", s.representation()},
                      {"arrays", arrays}});
  }

  const json manifest = {{"format_version", kBundleFormatVersion},
                         {"extractor_id", bundle.extractor_id},
                         {"source_id", bundle.source_id},
                         {"created_at", bundle.created_at},
                         {"levels", levels}};
  const fs::path path = dir / kBundleManifestName;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << manifest.dump(2) << '\n';
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

StatsBundle LoadBundle(const fs::path& dir) {
  const fs::path path = dir / kBundleManifestName;
  std::ifstream in(path);
  if (!in) throw IoError("no bundle manifest at '" + path.string() + "'");
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed bundle manifest '" + path.string() + "': " + e.what());
  }

  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kBundleFormatVersion) {
      throw FormatVersionError("bundle format_version " + std::to_string(version) +
                               " is not supported (expected " +
                               std::to_string(kBundleFormatVersion) + ")");
    }
    StatsBundle bundle;
    bundle.extractor_id = manifest.at("extractor_id").get<std::string>();
    bundle.source_id = manifest.at("source_id").get<std::string>();
    bundle.created_at = manifest.at("created_at").get<std::string>();
    const json& levels = manifest.at("levels");
    if (!levels.is_array() || levels.size() != kLevelCount) {
      throw IoError("bundle manifest must list exactly 3 levels");
    }
    for (std::size_t l = 0; l < kLevelCount; ++l) {
      const json& entry = levels[l];
      LevelStats& level = bundle.levels[l];
      level.name = entry.at("name").get<std::string>();
      const auto d = entry.at("dim").get<std::size_t>();
      const auto n = entry.at("count").get<std::size_t>();
      const auto rep = entry.at("representation").get<std::string>();
      const json& arrays = entry.at("arrays");

      GaussianStats& s = level.stats;
      s.count = n;
      const std::vector<double> mean = ReadArray(dir, arrays.at("mean"), d);
      s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(),
                                                 static_cast<Eigen::Index>(d));
      const auto di = static_cast<Eigen::Index>(d);
      if (rep == "dense_cov") {
        const std::vector<double> cov = ReadArray(dir, arrays.at("covariance"), d * d);
        s.covariance = DenseCovariance{Eigen::Map<const Eigen::MatrixXd>(cov.data(), di, di)};
      } else if (rep == "lowrank_factor") {
        const std::vector<double> factor = ReadArray(dir, arrays.at("factor"), n * d);
        s.covariance = LowRankFactor{
            Eigen::Map<const RowMatrix>(factor.data(), static_cast<Eigen::Index>(n), di)};
      } else {
        throw IoError("unknown representation '" + rep + "' in bundle manifest");
      }
      Validate(s);
    }
    return bundle;
  } catch (const json::exception& e) {
    throw IoError("malformed bundle manifest '" + path.string() + "': " + e.what());
  }
}

bool IsBundleDirectory(const fs::path& path) {
  std::error_code ec;
  return fs::is_directory(path, ec) &&
         fs::is_regular_file(path / kBundleManifestName, ec);
}

}  // namespace cfid
