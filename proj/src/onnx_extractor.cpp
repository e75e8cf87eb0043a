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

#include "cfid/onnx_extractor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "cfid/errors.hpp"
#include "cfid/hash.hpp"
#include "cfid/image_io.hpp"
#include "cfid/parallel.hpp"

namespace cfid {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json ReadJson(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ModelIoError(std::string("cannot open ") + what + " " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ModelIoError(std::string("malformed ") + what + " " + path.string() + ": " +
                       e.what());
  }
}

template <typename T>
T Field(const json& obj, const char* key, const fs::path& source) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ModelIoError(source.string() + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ModelIoError(source.string() + ": field '" + key + "' has the wrong type");
  }
}

std::array<LevelSpec, kLevelCount> ParseLevels(const json& manifest, const fs::path& source) {
  const json levels = Field<json>(manifest, "levels", source);
  if (!levels.is_array() || levels.size() != kLevelCount) {
    throw ShapeMismatch(source.string() + ": level table must list exactly 3 levels");
  }
  std::array<LevelSpec, kLevelCount> out;
  for (std::size_t l = 0; l < kLevelCount; ++l) {
    const json& e = levels[l];
    out[l].name = Field<std::string>(e, "name", source);
    out[l].channels = Field<std::size_t>(e, "channels", source);
    out[l].height = Field<std::size_t>(e, "height", source);
    out[l].width = Field<std::size_t>(e, "width", source);
    out[l].flat_dim = Field<std::size_t>(e, "flat_dim", source);
  }
  return out;
}

std::string Describe(const LevelSpec& l) {
  std::ostringstream s;
  s << l.name << " (" << l.channels << ", " << l.height << ", " << l.width << ") = "
    << l.flat_dim;
  return s.str();
}

}  // namespace

std::unique_ptr<OnnxExtractor> OnnxExtractor::Load(const fs::path& model_path,
                                                   const OnnxExtractorOptions& options) {
  std::error_code ec;
  if (!fs::is_regular_file(model_path, ec)) {
    throw ModelIoError("model file not found: " + model_path.string());
  }
  std::unique_ptr<OnnxExtractor> ex(new OnnxExtractor());
  ex->threads_ = std::max<std::size_t>(options.threads, 1);
  ex->manifest_path_ = options.manifest_path.empty()
                           ? model_path.parent_path() / "manifest.json"
                           : options.manifest_path;
  ex->manifest_ = ReadJson(ex->manifest_path_, "model manifest");
  const fs::path& mp = ex->manifest_path_;

  const int version = Field<int>(ex->manifest_, "format_version", mp);
  if (version != kModelManifestVersion) {
    throw FormatVersionError(mp.string() + ": unsupported format_version " +
                             std::to_string(version));
  }
  std::string model_hash;
  try {
    model_hash = Sha256HexOfFile(model_path);
  } catch (const Error& e) {
    throw ModelIoError(e.what());
  }
  const std::string declared = Field<std::string>(ex->manifest_, "extractor_id", mp);
  if (declared != model_hash) {
    throw ModelIoError(mp.string() + ": extractor_id " + declared +
                       " does not match the model bytes (sha256 " + model_hash + ")");
  }

  const std::array<LevelSpec, kLevelCount> expected = InceptionLevels();
  const std::array<LevelSpec, kLevelCount> levels = ParseLevels(ex->manifest_, mp);
  for (std::size_t l = 0; l < kLevelCount; ++l) {
    if (!(levels[l] == expected[l])) {
      throw ShapeMismatch(mp.string() + ": level " + std::to_string(l) + " is " +
                          Describe(levels[l]) + ", expected " + Describe(expected[l]));
    }
  }
  const json input = Field<json>(ex->manifest_, "input", mp);
  const auto side = Field<std::size_t>(input, "side", mp);
  if (side != kInceptionInputSide || Field<std::string>(input, "name", mp) != kModelInputName) {
    throw ShapeMismatch(mp.string() + ": input must be '" + kModelInputName + "' at " +
                        std::to_string(kInceptionInputSide) + " pixels");
  }

  ex->spec_.extractor_id = model_hash;
  ex->spec_.levels = levels;
  ex->spec_.input_side = side;
  Validate(ex->spec_);

  ex->graph_ = OnnxGraph::Load(model_path);
  const auto& inputs = ex->graph_.input_names();
  if (std::find(inputs.begin(), inputs.end(), kModelInputName) == inputs.end()) {
    throw ShapeMismatch(model_path.string() + ": model has no input named '" +
                        kModelInputName + "'");
  }
  std::vector<std::string> fetches;
  for (const LevelSpec& l : levels) {
    if (!ex->graph_.HasValue(l.name)) {
      throw ShapeMismatch(model_path.string() + ": model has no output named '" + l.name + "'");
    }
    fetches.push_back(l.name);
  }
  ex->graph_.CheckSupported(fetches);

  // Probe: one mid-gray image must produce exactly the declared tap shapes.
  ex->RunBatch(std::vector<float>(3 * side * side, 0.0f), 1);
  return ex;
}

std::vector<ImageFeatures> OnnxExtractor::RunBatch(std::vector<float> input,
                                                   std::size_t n) const {
  const auto side = static_cast<std::int64_t>(spec_.input_side);
  std::unordered_map<std::string, Tensor> feeds;
  Tensor& x = feeds[kModelInputName];
  x.shape = {static_cast<std::int64_t>(n), 3, side, side};
  x.data = std::move(input);
  std::vector<std::string> fetches;
  for (const LevelSpec& l : spec_.levels) fetches.push_back(l.name);
  std::unordered_map<std::string, Tensor> out = graph_.Run(feeds, fetches);

  std::vector<ImageFeatures> features(n);
  for (std::size_t l = 0; l < kLevelCount; ++l) {
    const LevelSpec& level = spec_.levels[l];
    const Tensor& t = out.at(level.name);
    const std::vector<std::int64_t> want = {static_cast<std::int64_t>(n),
                                            static_cast<std::int64_t>(level.channels),
                                            static_cast<std::int64_t>(level.height),
                                            static_cast<std::int64_t>(level.width)};
    // A flattened [N, C] tap is accepted for 1 x 1 levels.
    const bool flat_ok = level.height == 1 && level.width == 1 && t.shape.size() == 2 &&
                         t.shape[0] == want[0] && t.shape[1] == want[1];
    if (t.is_int || (t.shape != want && !flat_ok)) {
      std::string got;
      for (std::int64_t d : t.shape) got += (got.empty() ? "" : "x") + std::to_string(d);
      throw ShapeMismatch("model output " + level.name + " has shape [" + got +
                          "], expected " + Describe(level));
    }
    for (std::size_t i = 0; i < n; ++i) {
      features[i][l].level_name = level.name;
      const auto begin = t.data.begin() + static_cast<std::ptrdiff_t>(i * level.flat_dim);
      features[i][l].values.assign(begin, begin + static_cast<std::ptrdiff_t>(level.flat_dim));
    }
  }
  return features;
}

std::vector<ImageFeatures> OnnxExtractor::ExtractBatch(std::span<const Image> images) const {
  // One graph run per image keeps every output independent of batching.
  std::vector<ImageFeatures> out(images.size());
  ParallelFor(images.size(), threads_, [&](std::size_t i) {
    out[i] = std::move(RunBatch(Preprocess(images[i], spec_.input_side), 1).front());
  });
  return out;
}

ActivationChecksum Checksum(const std::vector<float>& values) {
  ActivationChecksum c;
  double sum = 0.0, sum_sq = 0.0;
  for (float v : values) {
    sum += v;
    sum_sq += static_cast<double>(v) * v;
    c.max_abs = std::max(c.max_abs, std::abs(static_cast<double>(v)));
  }
  const double n = static_cast<double>(std::max<std::size_t>(values.size(), 1));
  c.mean = sum / n;
  c.rms = std::sqrt(sum_sq / n);
  for (std::size_t i = 0; i < std::min(kChecksumHeadLength, values.size()); ++i) {
    c.head.push_back(values[i]);
  }
  return c;
}

GoldenCheck VerifyGolden(const OnnxExtractor& extractor, const fs::path& golden_path,
                         double tolerance) {
  const json golden = ReadJson(golden_path, "golden file");
  const std::string id = Field<std::string>(golden, "extractor_id", golden_path);
  if (id != extractor.id()) {
    throw ChecksumError(golden_path.string() + ": golden values belong to extractor " + id +
                        ", not " + extractor.id());
  }
  const fs::path image_path =
      golden_path.parent_path() / Field<std::string>(golden, "reference_image", golden_path);
  std::string image_hash;
  try {
    image_hash = Sha256HexOfFile(image_path);
  } catch (const Error& e) {
    throw ModelIoError(e.what());
  }
  if (image_hash != Field<std::string>(golden, "reference_sha256", golden_path)) {
    throw ChecksumError(image_path.string() + ": reference image hash mismatch");
  }
  const ImageFeatures features = extractor.Extract(LoadImage(image_path));
  const json levels = Field<json>(golden, "levels", golden_path);

  GoldenCheck check;
  check.ok = true;
  auto compare = [&](const std::string& what, double actual, double expected) {
    const double err = std::abs(actual - expected) / std::max(1.0, std::abs(expected));
    check.worst_relative_error = std::max(check.worst_relative_error, err);
    if (!(err <= tolerance)) {
      check.ok = false;
      std::ostringstream s;
      s.precision(17);
      s << what << ": got " << actual << ", expected " << expected << "; ";
      check.detail += s.str();
    }
  };
  for (std::size_t l = 0; l < kLevelCount; ++l) {
    const std::string& name = extractor.spec().levels[l].name;
    const json entry = Field<json>(levels, name.c_str(), golden_path);
    const ActivationChecksum c = Checksum(features[l].values);
    compare(name + ".mean", c.mean, Field<double>(entry, "mean", golden_path));
    compare(name + ".rms", c.rms, Field<double>(entry, "rms", golden_path));
    compare(name + ".max_abs", c.max_abs, Field<double>(entry, "max_abs", golden_path));
    if (entry.contains("head")) {
      const auto head = Field<std::vector<double>>(entry, "head", golden_path);
      if (head.size() > c.head.size()) {
        throw ModelIoError(golden_path.string() + ": head of " + name + " is too long");
      }
      for (std::size_t i = 0; i < head.size(); ++i) {
        compare(name + ".head[" + std::to_string(i) + "]", c.head[i], head[i]);
      }
    }
  }
  return check;
}

}  // namespace cfid
