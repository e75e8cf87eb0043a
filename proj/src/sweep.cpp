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

#include "cfid/sweep.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cfid/errors.hpp"
#include "cfid/random.hpp"

namespace cfid {
namespace {

namespace fs = std::filesystem;

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double ParseDouble(const std::string& field, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size()) {
    throw InvalidArgument("sweep csv line " + std::to_string(line) + ": bad number '" +
                          field + "'");
  }
  return v;
}

void WriteAtomically(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace

std::uint64_t SweepSeed(const SweepOptions& options, std::size_t alpha_index) {
  return options.reuse_noise ? options.seed : DeriveSeed(options.seed, alpha_index);
}

SweepResult RunSweep(const ImageSet& images, const Extractor& extractor,
                     const SweepOptions& options, const StatsBundle* baseline,
                     const std::vector<SweepRow>& completed, const SweepRowCallback& on_row) {
  SweepGrid grid{options.kind, options.alphas};
  if (grid.alphas.empty()) grid = DefaultSweepGrid(options.kind);
  Validate(grid);
  if (completed.size() > grid.alphas.size()) {
    throw InvalidArgument("existing sweep has more rows than the alpha grid");
  }
  for (std::size_t i = 0; i < completed.size(); ++i) {
    if (completed[i].alpha != grid.alphas[i]) {
      throw InvalidArgument("existing sweep row " + std::to_string(i) + " has alpha " +
                            FormatDouble(completed[i].alpha) + ", grid has " +
                            FormatDouble(grid.alphas[i]));
    }
  }

  SweepResult result;
  result.kind = options.kind;
  result.extractor_id = extractor.id();
  result.rows = completed;

  StatsBundle own_baseline;
  if (baseline != nullptr) {
    if (baseline->extractor_id != extractor.id()) {
      throw ExtractorMismatch("baseline was built with extractor '" + baseline->extractor_id +
                              "' but the sweep uses '" + extractor.id() + "'");
    }
    CheckBundleMatches(*baseline, extractor.spec());
    result.baseline_source = baseline->source_id;
  } else if (completed.size() < grid.alphas.size()) {
    own_baseline = ComputeBundle(images, extractor, options.pipeline);
    baseline = &own_baseline;
    result.baseline_source = images.source_id;
  } else {
    result.baseline_source = images.source_id;
  }

  for (std::size_t i = completed.size(); i < grid.alphas.size(); ++i) {
    DistortionSpec spec;
    spec.kind = options.kind;
    spec.alpha = grid.alphas[i];
    spec.rho = options.rho;
    spec.center = options.center;
    spec.seed = SweepSeed(options, i);
    const ImageSet distorted = DistortSet(images, spec, options.threads);
    const StatsBundle stats = ComputeBundle(distorted, extractor, options.pipeline);
    const CfidReport report = ScoreBundles(*baseline, stats, options.normalization);

    SweepRow row;
    row.alpha = spec.alpha;
    row.cfid1 = report.levels[0].normalized;
    row.cfid2 = report.levels[1].normalized;
    row.cfid3 = report.levels[2].normalized;
    row.cfid_max = report.cfid_max;
    row.argmax_level = report.argmax_level;
    result.rows.push_back(row);
    if (on_row) on_row(result);
  }
  return result;
}

std::string FormatSweepCsv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSweepCsvHeader) + "\n";
  for (const SweepRow& r : rows) {
    out += FormatDouble(r.alpha) + "," + FormatDouble(r.cfid1) + "," + FormatDouble(r.cfid2) +
           "," + FormatDouble(r.cfid3) + "," + FormatDouble(r.cfid_max) + "," +
           r.argmax_level + "\n";
  }
  return out;
}

std::vector<SweepRow> ReadSweepCsv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kSweepCsvHeader) {
    throw InvalidArgument(path.string() + ": missing sweep csv header");
  }
  std::vector<SweepRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() != 6) {
      throw InvalidArgument(path.string() + ": line " + std::to_string(line_no) +
                            " does not have 6 fields");
    }
    SweepRow r;
    r.alpha = ParseDouble(fields[0], line_no);
    r.cfid1 = ParseDouble(fields[1], line_no);
    r.cfid2 = ParseDouble(fields[2], line_no);
    r.cfid3 = ParseDouble(fields[3], line_no);
    r.cfid_max = ParseDouble(fields[4], line_no);
    r.argmax_level = fields[5];
    rows.push_back(std::move(r));
  }
  return rows;
}

nlohmann::json ToJson(const SweepResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const SweepRow& r : result.rows) {
    rows.push_back({{"alpha", r.alpha},
                    {"cfid1_norm", r.cfid1},
                    {"cfid2_norm", r.cfid2},
                    {"cfid3_norm", r.cfid3},
                    {"cfid_max", r.cfid_max},
                    {"argmax_level", r.argmax_level}});
  }
  return {{"kind", ToString(result.kind)},
          {"extractor_id", result.extractor_id},
          {"baseline_source", result.baseline_source},
          {"rows", rows}};
}

fs::path SweepJsonPath(const fs::path& csv_path) {
  fs::path p = csv_path;
  p.replace_extension(".json");
  if (p == csv_path) p += ".json";
  return p;
}

void WriteSweepFiles(const SweepResult& result, const fs::path& csv_path) {
  WriteAtomically(csv_path, FormatSweepCsv(result.rows));
  WriteAtomically(SweepJsonPath(csv_path), ToJson(result).dump(2) + "\n");
}

}  // namespace cfid
