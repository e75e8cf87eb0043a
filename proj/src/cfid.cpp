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

#include "cfid/cfid.hpp"

#include <algorithm>
#include <cmath>

#include "cfid/errors.hpp"

namespace cfid {

std::string_view ToString(Normalization normalization) {
  return normalization == Normalization::kWholeScore ? "whole_score"
                                                     : "covariance_only";
}

Normalization ParseNormalization(std::string_view name) {
  if (name == "whole_score" || name == "whole") return Normalization::kWholeScore;
  if (name == "covariance_only" || name == "covariance") {
    return Normalization::kCovarianceOnly;
  }
  throw InvalidArgument("unknown normalization '" + std::string(name) + "'");
}

double LevelScale(std::size_t flat_dim) {
  if (flat_dim == 0) throw InvalidArgument("flat_dim must be positive");
  return static_cast<double>(kReferenceFlatDim) / static_cast<double>(flat_dim);
}

LevelScore ScoreLevel(const GaussianStats& real, const GaussianStats& gen,
                      const LevelSpec& level, Normalization normalization) {
  if (real.dim() != level.flat_dim || gen.dim() != level.flat_dim) {
    throw DimensionMismatch("level " + level.name + " expects dimension " +
                            std::to_string(level.flat_dim) + ", got " +
                            std::to_string(real.dim()) + " and " +
                            std::to_string(gen.dim()));
  }
  LevelScore score;
  score.level_name = level.name;
  score.flat_dim = level.flat_dim;
  score.breakdown = Frechet(real, gen);
  score.raw = score.breakdown.total;
  score.scale = LevelScale(level.flat_dim);
  if (normalization == Normalization::kWholeScore) {
    score.normalized = score.scale * score.raw;
  } else {
    const FrechetBreakdown& b = score.breakdown;
    const double covariance_part = b.trace_r + b.trace_g - 2.0 * b.cross_term;
    score.normalized = std::max(b.mean_term + score.scale * covariance_part, 0.0);
  }
  return score;
}

CfidReport Compose(std::vector<LevelScore> levels, std::string extractor_id,
                   std::pair<std::size_t, std::size_t> sample_counts,
                   Normalization normalization) {
  if (levels.size() != kLevelCount) {
    throw WrongLevelCount("expected 3 level scores, got " +
                          std::to_string(levels.size()));
  }
  CfidReport report;
  report.extractor_id = std::move(extractor_id);
  report.normalization = normalization;
  report.sample_counts = sample_counts;
  std::size_t best = 0;
  for (std::size_t l = 1; l < levels.size(); ++l) {
    if (levels[l].normalized >= levels[best].normalized) best = l;
  }
  report.cfid_max = levels[best].normalized;
  report.argmax_level = levels[best].level_name;
  report.levels = std::move(levels);
  return report;
}

CfidReport ScoreBundles(const StatsBundle& real, const StatsBundle& gen,
                        Normalization normalization) {
  if (real.extractor_id != gen.extractor_id) {
    throw ExtractorMismatch("statistics come from different extractors: '" +
                            real.extractor_id + "' vs '" + gen.extractor_id + "'");
  }
  std::vector<LevelScore> scores;
  scores.reserve(kLevelCount);
  for (std::size_t l = 0; l < kLevelCount; ++l) {
    const LevelStats& r = real.levels[l];
    const LevelStats& g = gen.levels[l];
    if (r.name != g.name || r.stats.dim() != g.stats.dim()) {
      throw ShapeMismatch("level " + std::to_string(l) + " differs: " + r.name +
                          " vs " + g.name);
    }
    const LevelSpec level{r.name, 0, 0, 0, r.stats.dim()};
    scores.push_back(ScoreLevel(r.stats, g.stats, level, normalization));
  }
  return Compose(std::move(scores), real.extractor_id,
                 {real.levels[0].stats.count, gen.levels[0].stats.count},
                 normalization);
}

namespace {

StatsBundle Resolve(const StatsSource& source, const Extractor* extractor,
                    const PipelineOptions& options) {
  if (const auto* bundle = std::get_if<StatsBundle>(&source)) {
    if (extractor != nullptr) {
      if (bundle->extractor_id != extractor->id()) {
        throw ExtractorMismatch("bundle was built with extractor '" +
                                bundle->extractor_id + "' but images use '" +
                                extractor->id() + "'");
      }
      CheckBundleMatches(*bundle, extractor->spec());
    }
    return *bundle;
  }
  if (extractor == nullptr) {
    throw InvalidArgument("an extractor is required to score an image set");
  }
  return ComputeBundle(std::get<ImageSet>(source), *extractor, options);
}

}  // namespace

CfidReport ScoreSets(const StatsSource& real, const StatsSource& gen,
                     const Extractor* extractor, const ScoreOptions& options) {
  const StatsBundle r = Resolve(real, extractor, options.pipeline);
  const StatsBundle g = Resolve(gen, extractor, options.pipeline);
  return ScoreBundles(r, g, options.normalization);
}

void CheckReportInvariants(const CfidReport& report) {
  if (report.levels.size() != kLevelCount) {
    throw InvalidArgument("report does not hold three levels");
  }
  double best = -1.0;
  for (const LevelScore& level : report.levels) {
    const FrechetBreakdown& b = level.breakdown;
    const double recomposed = b.mean_term + b.trace_r + b.trace_g - 2.0 * b.cross_term;
    const double tol = 1e-12 * std::max({1.0, std::abs(b.mean_term) + std::abs(b.trace_r) +
                                                  std::abs(b.trace_g) +
                                                  2.0 * std::abs(b.cross_term)});
    if (std::abs(recomposed - b.raw_total) > tol) {
      throw InvalidArgument(level.level_name + ": breakdown terms do not sum to total");
    }
    if (b.total < 0.0) throw InvalidArgument(level.level_name + ": negative total");
    if (level.scale != LevelScale(level.flat_dim)) {
      throw InvalidArgument(level.level_name + ": scale is not 2048 / flat_dim");
    }
    if (report.normalization == Normalization::kWholeScore &&
        std::abs(level.normalized - level.scale * level.raw) >
            1e-12 * std::max(1.0, std::abs(level.normalized))) {
      throw InvalidArgument(level.level_name + ": normalized != scale * raw");
    }
    best = std::max(best, level.normalized);
  }
  if (report.cfid_max != best) {
    throw InvalidArgument("cfid_max is not the maximum normalized score");
  }
  bool argmax_found = false;
  for (const LevelScore& level : report.levels) {
    if (level.level_name == report.argmax_level && level.normalized == best) {
      argmax_found = true;
    }
  }
  if (!argmax_found) throw InvalidArgument("argmax_level is inconsistent");
}

nlohmann::json ToJson(const FrechetBreakdown& b) {
  return {{"mean_term", b.mean_term},
          {"trace_r", b.trace_r},
          {"trace_g", b.trace_g},
          {"cross_term", b.cross_term},
          {"raw_total", b.raw_total},
          {"total", b.total},
          {"clamped_eigenvalues", b.clamped_eigenvalues},
          {"path", ToString(b.path)},
          {"regularized", b.regularized},
          {"clamping_warning", b.clamping_warning}};
}

nlohmann::json ToJson(const CfidReport& report) {
  nlohmann::json levels = nlohmann::json::array();
  for (const LevelScore& level : report.levels) {
    levels.push_back({{"level_name", level.level_name},
                      {"flat_dim", level.flat_dim},
                      {"raw", level.raw},
                      {"scale", level.scale},
                      {"normalized", level.normalized},
                      {"breakdown", ToJson(level.breakdown)}});
  }
  return {{"extractor_id", report.extractor_id},
          {"normalization", ToString(report.normalization)},
          {"levels", levels},
          {"cfid_max", report.cfid_max},
          {"argmax_level", report.argmax_level},
          {"sample_counts",
           {report.sample_counts.first, report.sample_counts.second}}};
}

}  // namespace cfid
