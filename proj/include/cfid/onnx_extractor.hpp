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

// Inception-V3 taps served from an exported ONNX file.
//
// The model directory holds three files:
//
//   <model>.onnx   one float input "input" (N x 3 x 299 x 299, values in
//                  [-1, 1]) and outputs "MaxPool1", "MaxPool2", "AvgPool".
//   manifest.json  {"format_version": 1,
//                   "extractor_id": "<sha256 of the model bytes>",
//                   "input": {"name": "input", "side": 299, "layout": "NCHW",
//                             "range": [-1, 1]},
//                   "preprocessing": "<free text>",
//                   "levels": [{"name", "channels", "height", "width",
//                               "flat_dim"} x 3],
//                   "golden": "golden.json"}            (golden optional)
//   golden.json    {"extractor_id": "...", "reference_image": "ref.png",
//                   "reference_sha256": "<sha256 of the image file>",
//                   "levels": {"MaxPool1": {"mean", "rms", "max_abs",
//                                           "head": [first values]}, ...}}

#ifndef CFID_ONNX_EXTRACTOR_HPP_
#define CFID_ONNX_EXTRACTOR_HPP_

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfid/extractor.hpp"
#include "cfid/onnx_graph.hpp"

namespace cfid {

inline constexpr int kModelManifestVersion = 1;
inline constexpr char kModelInputName[] = "input";

struct OnnxExtractorOptions {
  // Empty: manifest.json next to the model file.
  std::filesystem::path manifest_path;
  std::size_t threads = 1;
};

class OnnxExtractor final : public Extractor {
 public:
  // Loads and validates the model against its manifest and InceptionLevels().
  // Throws ModelIoError for missing or corrupt files, a manifest that does
  // not describe these model bytes, or unsupported operators; ShapeMismatch
  // when the level table or the probed output shapes disagree.
  static std::unique_ptr<OnnxExtractor> Load(const std::filesystem::path& model_path,
                                             const OnnxExtractorOptions& options = {});

  const ExtractorSpec& spec() const override { return spec_; }
  std::vector<ImageFeatures> ExtractBatch(std::span<const Image> images) const override;

  const nlohmann::json& manifest() const { return manifest_; }
  const std::filesystem::path& manifest_path() const { return manifest_path_; }

 private:
  OnnxExtractor() = default;

  // Runs a preprocessed N x 3 x side x side batch.
  std::vector<ImageFeatures> RunBatch(std::vector<float> input, std::size_t n) const;

  ExtractorSpec spec_;
  OnnxGraph graph_;
  nlohmann::json manifest_;
  std::filesystem::path manifest_path_;
  std::size_t threads_ = 1;
};

// Per-level summary of one activation vector, as stored in golden.json.
struct ActivationChecksum {
  double mean = 0.0;
  double rms = 0.0;
  double max_abs = 0.0;
  std::vector<double> head;
};

inline constexpr std::size_t kChecksumHeadLength = 8;

ActivationChecksum Checksum(const std::vector<float>& values);

struct GoldenCheck {
  bool ok = false;
  // Largest |actual - expected| / max(1, |expected|) over all fields.
  double worst_relative_error = 0.0;
  std::string detail;
};

inline constexpr double kGoldenTolerance = 1e-4;

// Pushes the golden reference image through `extractor` and compares the
// per-level checksums. Throws ModelIoError if golden.json or the image is
// unreadable, ChecksumError if the image hash or extractor_id differ.
GoldenCheck VerifyGolden(const OnnxExtractor& extractor,
                         const std::filesystem::path& golden_path,
                         double tolerance = kGoldenTolerance);

}  // namespace cfid

#endif  // CFID_ONNX_EXTRACTOR_HPP_
