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

// Alpha sweeps: distort a set at increasing strengths and score each level
// against an undistorted baseline.

#ifndef CFID_SWEEP_HPP_
#define CFID_SWEEP_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfid/bundle.hpp"
#include "cfid/cfid.hpp"
#include "cfid/distortions.hpp"
#include "cfid/extractor.hpp"
#include "cfid/image.hpp"
#include "cfid/pipeline.hpp"

namespace cfid {

inline constexpr char kSweepCsvHeader[] = "alpha,cfid1,cfid2,cfid3,cfid_max,argmax";

struct SweepRow {
  double alpha = 0.0;
  double cfid1 = 0.0;
  double cfid2 = 0.0;
  double cfid3 = 0.0;
  double cfid_max = 0.0;
  std::string argmax_level;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepResult {
  DistortionKind kind = DistortionKind::kGaussianNoise;
  std::vector<SweepRow> rows;
  std::string baseline_source;
  std::string extractor_id;
};

struct SweepOptions {
  DistortionKind kind = DistortionKind::kGaussianNoise;
  // Empty: DefaultSweepGrid(kind).
  std::vector<double> alphas;
  std::uint64_t seed = 0;
  double rho = kDefaultSwirlRadius;
  std::optional<PixelCoord> center;
  // Stochastic kinds draw from DeriveSeed(seed, alpha_index) unless set, in
  // which case every alpha reuses `seed` (and so the same noise rasters).
  bool reuse_noise = false;
  PipelineOptions pipeline;
  Normalization normalization = Normalization::kWholeScore;
  std::size_t threads = 1;
};

// Seed handed to DistortSet for the alpha at `alpha_index`.
std::uint64_t SweepSeed(const SweepOptions& options, std::size_t alpha_index);

// Called after each new row with the result so far.
using SweepRowCallback = std::function<void(const SweepResult&)>;

// Runs the sweep over `images`. The baseline is `baseline` if given (its
// extractor must match), otherwise the undistorted `images`. Rows already in
// `completed` are kept and skipped; they must be a prefix of the alpha grid.
SweepResult RunSweep(const ImageSet& images, const Extractor& extractor,
                     const SweepOptions& options, const StatsBundle* baseline = nullptr,
                     const std::vector<SweepRow>& completed = {},
                     const SweepRowCallback& on_row = nullptr);

// CSV with kSweepCsvHeader, LF line endings and %.17g numbers.
std::string FormatSweepCsv(const std::vector<SweepRow>& rows);
// Throws IoError on a missing file, InvalidArgument on a malformed one.
std::vector<SweepRow> ReadSweepCsv(const std::filesystem::path& path);

nlohmann::json ToJson(const SweepResult& result);

// Writes `csv_path` and its JSON twin (same stem, .json) via temp files.
void WriteSweepFiles(const SweepResult& result, const std::filesystem::path& csv_path);

std::filesystem::path SweepJsonPath(const std::filesystem::path& csv_path);

}  // namespace cfid

#endif  // CFID_SWEEP_HPP_
