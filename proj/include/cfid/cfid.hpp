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

// Compound Frechet Inception Distance.
//
// One Frechet distance per feature level (CFID_1 at MaxPool1, CFID_2 at
// MaxPool2, CFID_3 at AvgPool), each normalized onto the 2048-feature AvgPool
// scale by the feature-count ratio 2048 / flat_dim, and a single score that
// is the maximum of the three normalized values. CFID_3 has scale 1 and is the
// ordinary FID.

#ifndef CFID_CFID_HPP_
#define CFID_CFID_HPP_

#include <cstddef>
#include <json.hpp>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cfid/bundle.hpp"
#include "cfid/extractor.hpp"
#include "cfid/frechet.hpp"
#include "cfid/image.hpp"
#include "cfid/pipeline.hpp"

namespace cfid {

// Feature count of the AvgPool tap that every level is normalized onto.
inline constexpr std::size_t kReferenceFlatDim = 2048;

enum class Normalization {
  // normalized = scale * raw.
  kWholeScore,
  // Only the covariance terms are scaled:
  // normalized = mean_term + scale * (trace_r + trace_g - 2 cross_term).
  kCovarianceOnly,
};

std::string_view ToString(Normalization normalization);
Normalization ParseNormalization(std::string_view name);

// kReferenceFlatDim / flat_dim.
double LevelScale(std::size_t flat_dim);

struct LevelScore {
  std::string level_name;
  std::size_t flat_dim = 0;
  double raw = 0.0;
  double scale = 1.0;
  double normalized = 0.0;
  FrechetBreakdown breakdown;
};

struct CfidReport {
  std::string extractor_id;
  Normalization normalization = Normalization::kWholeScore;
  std::vector<LevelScore> levels;
  double cfid_max = 0.0;
  std::string argmax_level;
  std::pair<std::size_t, std::size_t> sample_counts{0, 0};
};

// Throws DimensionMismatch if either stats' dim differs from level.flat_dim.
LevelScore ScoreLevel(const GaussianStats& real, const GaussianStats& gen,
                      const LevelSpec& level,
                      Normalization normalization = Normalization::kWholeScore);

// Max over normalized scores; ties go to the later (more abstract) level.
// Throws WrongLevelCount unless exactly three levels are given.
CfidReport Compose(std::vector<LevelScore> levels, std::string extractor_id,
                   std::pair<std::size_t, std::size_t> sample_counts,
                   Normalization normalization = Normalization::kWholeScore);

// Throws ExtractorMismatch when the bundles come from different extractors,
// ShapeMismatch when their level tables differ.
CfidReport ScoreBundles(const StatsBundle& real, const StatsBundle& gen,
                        Normalization normalization = Normalization::kWholeScore);

// An image set to be extracted, or precomputed statistics.
using StatsSource = std::variant<ImageSet, StatsBundle>;

struct ScoreOptions {
  PipelineOptions pipeline;
  Normalization normalization = Normalization::kWholeScore;
};

// End to end: extract image sets (bundles are used as-is), then score.
// `extractor` may be null only when both sides are bundles. A bundle whose
// extractor_id differs from the extractor's raises ExtractorMismatch.
CfidReport ScoreSets(const StatsSource& real, const StatsSource& gen,
                     const Extractor* extractor,
                     const ScoreOptions& options = {});

// Throws InvalidArgument naming the first violated report invariant.
void CheckReportInvariants(const CfidReport& report);

nlohmann::json ToJson(const FrechetBreakdown& breakdown);
nlohmann::json ToJson(const CfidReport& report);

}  // namespace cfid

#endif  // CFID_CFID_HPP_
