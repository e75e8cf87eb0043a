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

// cfid: extract | score | distort | sweep | verify-model
//
// Errors are reported as a single stderr line
//   cfid: error: <ErrorClass>: <message>
// and the process exits with the class's code (2 I/O and model, 3
// compatibility, 4 validation, 1 anything else).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cfid/bundle.hpp"
#include "cfid/cfid.hpp"
#include "cfid/distortions.hpp"
#include "cfid/errors.hpp"
#include "cfid/image_io.hpp"
#include "cfid/onnx_extractor.hpp"
#include "cfid/pipeline.hpp"
#include "cfid/sweep.hpp"
#include "cfid/toy_extractor.hpp"

namespace {

namespace fs = std::filesystem;
using cfid::Error;

struct ExtractorFlags {
  std::string kind = "onnx";
  std::string model;
  std::string manifest;
  std::size_t batch = 8;
  std::size_t max_samples = 2048;
  std::string mode = "auto";
};

struct Common {
  std::size_t threads = 1;
};

void AddExtractorFlags(CLI::App* cmd, ExtractorFlags& f) {
  cmd->add_option("--extractor", f.kind, "Feature extractor")
      ->check(CLI::IsMember({"onnx", "toy"}))
      ->capture_default_str();
  cmd->add_option("--model", f.model, "Exported Inception-V3 model file")
      ->envname("CFID_MODEL");
  cmd->add_option("--manifest", f.manifest,
                  "Model manifest (default: manifest.json next to the model)");
  cmd->add_option("--batch", f.batch, "Images per extraction call")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--max-samples", f.max_samples,
                  "Use the first N images in name order (0 = all)")
      ->capture_default_str();
  cmd->add_option("--mode", f.mode, "Covariance representation")
      ->check(CLI::IsMember({"auto", "dense", "lowrank"}))
      ->capture_default_str();
}

void AddThreads(CLI::App* cmd, Common& c) {
  cmd->add_option("--threads", c.threads, "Worker threads")
      ->envname("CFID_THREADS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

std::unique_ptr<cfid::Extractor> MakeExtractor(const ExtractorFlags& f, const Common& c) {
  if (f.kind == "toy") return std::make_unique<cfid::ToyExtractor>(c.threads);
  if (f.model.empty()) {
    throw cfid::ModelIoError("no model given; pass --model or set CFID_MODEL");
  }
  cfid::OnnxExtractorOptions options;
  options.manifest_path = f.manifest;
  options.threads = c.threads;
  return cfid::OnnxExtractor::Load(f.model, options);
}

cfid::PipelineOptions MakePipeline(const ExtractorFlags& f) {
  cfid::PipelineOptions p;
  p.batch_size = f.batch;
  p.max_samples = f.max_samples;
  p.mode = cfid::ParseCovarianceMode(f.mode);
  return p;
}

cfid::LoadSetOptions MakeLoadOptions(const ExtractorFlags& f, const Common& c) {
  cfid::LoadSetOptions o;
  o.max_images = f.max_samples;
  o.threads = c.threads;
  return o;
}

std::optional<cfid::PixelCoord> ParseCenter(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const std::size_t comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    const double x = std::stod(text.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument(text);
    const std::string rest = text.substr(comma + 1);
    const double y = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(text);
    return cfid::PixelCoord{x, y};
  } catch (const std::exception&) {
    throw cfid::InvalidArgument("--center expects X,Y, got '" + text + "'");
  }
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw cfid::IoError("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw cfid::IoError("failed writing " + path.string());
}

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------

int RunExtract(const std::string& dir, const std::string& out, const ExtractorFlags& f,
               const Common& c) {
  const auto extractor = MakeExtractor(f, c);
  const cfid::ImageSet set = cfid::LoadImageSet(dir, MakeLoadOptions(f, c));
  const cfid::StatsBundle bundle = cfid::ComputeBundle(set, *extractor, MakePipeline(f));
  cfid::SaveBundle(bundle, out);
  for (const cfid::LevelStats& level : bundle.levels) {
    std::cout << level.name << " dim=" << level.stats.dim() << " count=" << level.stats.count
              << " representation=" << level.stats.representation() << "\n";
  }
  return 0;
}

cfid::StatsSource LoadSource(const std::string& path, const ExtractorFlags& f, const Common& c) {
  if (cfid::IsBundleDirectory(path)) return cfid::LoadBundle(path);
  return cfid::LoadImageSet(path, MakeLoadOptions(f, c));
}

int RunScore(const std::string& a, const std::string& b, const std::string& out,
             const std::string& normalization, const ExtractorFlags& f, const Common& c) {
  const cfid::StatsSource real = LoadSource(a, f, c);
  const cfid::StatsSource gen = LoadSource(b, f, c);
  std::unique_ptr<cfid::Extractor> extractor;
  const bool needs_extractor = std::holds_alternative<cfid::ImageSet>(real) ||
                               std::holds_alternative<cfid::ImageSet>(gen);
  if (needs_extractor) extractor = MakeExtractor(f, c);
  cfid::ScoreOptions options;
  options.pipeline = MakePipeline(f);
  options.normalization = cfid::ParseNormalization(normalization);
  const cfid::CfidReport report = cfid::ScoreSets(real, gen, extractor.get(), options);
  cfid::CheckReportInvariants(report);
  if (!out.empty()) WriteText(out, cfid::ToJson(report).dump(2) + "\n");
  std::cout << "cfid_max=" << Num(report.cfid_max) << " argmax_level=" << report.argmax_level
            << "\n";
  return 0;
}

int RunDistort(const std::string& dir, const std::string& out, const std::string& kind,
               double alpha, std::uint64_t seed, double rho, const std::string& center,
               const Common& c) {
  cfid::DistortionSpec spec;
  spec.kind = cfid::ParseDistortionKind(kind);
  spec.alpha = alpha;
  spec.rho = rho;
  spec.center = ParseCenter(center);
  spec.seed = seed;
  cfid::Validate(spec);
  cfid::LoadSetOptions load;
  load.threads = c.threads;
  const cfid::ImageSet set = cfid::LoadImageSet(dir, load);
  cfid::SaveImageSet(cfid::DistortSet(set, spec, c.threads), out);
  std::cout << "wrote " << set.size() << " images to " << out << "\n";
  return 0;
}

struct SweepFlags {
  std::string kind;
  std::string out;
  std::vector<double> alphas;
  std::uint64_t seed = 0;
  double rho = cfid::kDefaultSwirlRadius;
  std::string center;
  std::string baseline;
  bool reuse_noise = false;
  bool resume = false;
  std::string normalization = "whole_score";
};

int RunSweepCommand(const std::string& dir, const SweepFlags& s, const ExtractorFlags& f,
                    const Common& c) {
  cfid::SweepOptions options;
  options.kind = cfid::ParseDistortionKind(s.kind);
  options.alphas = s.alphas;
  options.seed = s.seed;
  options.rho = s.rho;
  options.center = ParseCenter(s.center);
  options.reuse_noise = s.reuse_noise;
  options.pipeline = MakePipeline(f);
  options.normalization = cfid::ParseNormalization(s.normalization);
  options.threads = c.threads;

  std::vector<cfid::SweepRow> completed;
  if (s.resume && fs::exists(s.out)) completed = cfid::ReadSweepCsv(s.out);

  const auto extractor = MakeExtractor(f, c);
  const cfid::ImageSet set = cfid::LoadImageSet(dir, MakeLoadOptions(f, c));
  std::optional<cfid::StatsBundle> baseline;
  if (!s.baseline.empty()) {
    const cfid::StatsSource source = LoadSource(s.baseline, f, c);
    if (const auto* bundle = std::get_if<cfid::StatsBundle>(&source)) {
      baseline = *bundle;
    } else {
      baseline = cfid::ComputeBundle(std::get<cfid::ImageSet>(source), *extractor,
                                     options.pipeline);
    }
  }
  const cfid::SweepResult result = cfid::RunSweep(
      set, *extractor, options, baseline ? &*baseline : nullptr, completed,
      [&](const cfid::SweepResult& partial) {
        cfid::WriteSweepFiles(partial, s.out);
        const cfid::SweepRow& row = partial.rows.back();
        std::cout << "alpha=" << Num(row.alpha) << " cfid1=" << Num(row.cfid1)
                  << " cfid2=" << Num(row.cfid2) << " cfid3=" << Num(row.cfid3)
                  << " cfid_max=" << Num(row.cfid_max) << " argmax=" << row.argmax_level
                  << std::endl;
      });
  cfid::WriteSweepFiles(result, s.out);
  return 0;
}

int RunVerifyModel(const std::string& golden, const ExtractorFlags& f, const Common& c) {
  ExtractorFlags onnx = f;
  onnx.kind = "onnx";
  const auto extractor = MakeExtractor(onnx, c);
  const auto& model = static_cast<const cfid::OnnxExtractor&>(*extractor);
  fs::path golden_path = golden;
  if (golden_path.empty()) {
    const nlohmann::json& m = model.manifest();
    const std::string name = m.contains("golden") && m["golden"].is_string()
                                 ? m["golden"].get<std::string>()
                                 : "golden.json";
    golden_path = model.manifest_path().parent_path() / name;
  }
  const cfid::GoldenCheck check = cfid::VerifyGolden(model, golden_path);
  if (!check.ok) {
    throw cfid::ChecksumError("golden activations differ: " + check.detail);
  }
  std::cout << "extractor_id=" << model.id()
            << " golden=ok worst_relative_error=" << Num(check.worst_relative_error) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compound Frechet Inception Distance between image sets"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cfid 1.0.0");

  ExtractorFlags f;
  Common c;

  std::string dir, out, a, b, normalization = "whole_score";
  auto* extract = app.add_subcommand("extract", "Extract per-level statistics to a bundle");
  extract->add_option("images_dir", dir, "Image directory")->required();
  extract->add_option("--out", out, "Output bundle directory")->required();
  AddExtractorFlags(extract, f);
  AddThreads(extract, c);

  auto* score = app.add_subcommand("score", "Score two image directories or bundles");
  score->add_option("a", a, "Reference directory or bundle")->required();
  score->add_option("b", b, "Generated directory or bundle")->required();
  score->add_option("--out", out, "Write the CfidReport JSON here");
  score->add_option("--normalization", normalization, "whole_score or covariance_only")
      ->capture_default_str();
  AddExtractorFlags(score, f);
  AddThreads(score, c);

  std::string kind, center;
  double alpha = 0.0, rho = cfid::kDefaultSwirlRadius;
  std::uint64_t seed = 0;
  auto* distort = app.add_subcommand("distort", "Write a distorted copy of an image set");
  distort->add_option("images_dir", dir, "Image directory")->required();
  distort->add_option("--kind", kind, "gaussian_noise | gaussian_blur | spiral_warp | salt_pepper")
      ->required();
  distort->add_option("--alpha", alpha, "Distortion strength")->required();
  distort->add_option("--seed", seed, "Seed for stochastic kinds")->capture_default_str();
  distort->add_option("--rho", rho, "Swirl radius")->capture_default_str();
  distort->add_option("--center", center, "Swirl center X,Y (default: image center)");
  distort->add_option("--out", out, "Output directory")->required();
  AddThreads(distort, c);

  SweepFlags s;
  auto* sweep = app.add_subcommand("sweep", "Score a distortion at increasing alpha");
  sweep->add_option("images_dir", dir, "Image directory")->required();
  sweep->add_option("--kind", s.kind, "Distortion kind")->required();
  sweep->add_option("--out", s.out, "Output CSV (a .json twin is written alongside)")
      ->required();
  sweep->add_option("--alphas", s.alphas, "Alpha grid (default: the kind's standard grid)")
      ->delimiter(',');
  sweep->add_option("--seed", s.seed, "Seed for stochastic kinds")->capture_default_str();
  sweep->add_option("--rho", s.rho, "Swirl radius")->capture_default_str();
  sweep->add_option("--center", s.center, "Swirl center X,Y");
  sweep->add_option("--baseline-dir", s.baseline,
                    "Score against this directory or bundle instead of the clean set");
  sweep->add_flag("--reuse-noise", s.reuse_noise,
                  "Use the same noise seed at every alpha instead of one per alpha");
  sweep->add_flag("--resume", s.resume, "Keep rows already present in --out");
  sweep->add_option("--normalization", s.normalization, "whole_score or covariance_only")
      ->capture_default_str();
  AddExtractorFlags(sweep, f);
  AddThreads(sweep, c);

  std::string golden;
  auto* verify = app.add_subcommand("verify-model",
                                    "Check a model against its golden activations");
  verify->add_option("--model", f.model, "Exported model file")->envname("CFID_MODEL");
  verify->add_option("--manifest", f.manifest, "Model manifest");
  verify->add_option("--golden", golden, "golden.json (default: named by the manifest)");
  AddThreads(verify, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "cfid: error: InvalidArgument: " << e.what() << "\n";
    return static_cast<int>(cfid::ExitCode::kValidation);
  }

  try {
    if (*extract) return RunExtract(dir, out, f, c);
    if (*score) return RunScore(a, b, out, normalization, f, c);
    if (*distort) return RunDistort(dir, out, kind, alpha, seed, rho, center, c);
    if (*sweep) return RunSweepCommand(dir, s, f, c);
    if (*verify) return RunVerifyModel(golden, f, c);
  } catch (const Error& e) {
    std::cerr << "cfid: error: " << e.error_class() << ": " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::bad_alloc&) {
    std::cerr << "cfid: error: OutOfMemory: allocation failed\n";
    return static_cast<int>(cfid::ExitCode::kFailure);
  } catch (const std::exception& e) {
    std::cerr << "cfid: error: InternalError: " << e.what() << "\n";
    return static_cast<int>(cfid::ExitCode::kFailure);
  }
  return 0;
}
