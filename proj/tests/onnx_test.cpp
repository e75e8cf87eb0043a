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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "cfid/errors.hpp"
#include "cfid/image_io.hpp"
#include "cfid/onnx_extractor.hpp"
#include "cfid/onnx_graph.hpp"
#include "onnx_builder.hpp"
#include "test_support.hpp"

namespace cfid {
namespace {

using testing::ModelBuilder;
using testing::RandomFloats;
using testing::TempDir;

OnnxGraph Build(const ModelBuilder& b) {
  const std::string bytes = b.Bytes();
  return OnnxGraph::Parse(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

Tensor MakeTensor(std::vector<std::int64_t> shape, std::vector<float> data) {
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::move(data);
  return t;
}

Tensor RunOne(const ModelBuilder& b, const Tensor& x, const std::string& out = "y") {
  const OnnxGraph g = Build(b);
  auto result = g.Run({{"x", x}}, {out});
  return result.at(out);
}

void ExpectClose(const Tensor& t, const std::vector<double>& expected, double tol = 1e-4) {
  ASSERT_EQ(t.data.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_NEAR(t.data[i], expected[i], tol * std::max(1.0, std::abs(expected[i]))) << "i=" << i;
  }
}

// Direct NCHW convolution in double.
std::vector<double> ConvOracle(const Tensor& x, const std::vector<float>& w,
                               const std::vector<float>& bias, std::int64_t cout,
                               std::int64_t kh, std::int64_t kw, std::int64_t group,
                               std::array<std::int64_t, 4> pads, std::array<std::int64_t, 2> s,
                               std::array<std::int64_t, 2> d, std::int64_t oh, std::int64_t ow) {
  const std::int64_t n = x.shape[0], cin = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const std::int64_t cpg = cin / group, opg = cout / group;
  std::vector<double> y(std::size_t(n * cout * oh * ow), 0.0);
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t oc = 0; oc < cout; ++oc) {
      const std::int64_t g = oc / opg;
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[std::size_t(oc)];
          for (std::int64_t ic = 0; ic < cpg; ++ic) {
            for (std::int64_t ky = 0; ky < kh; ++ky) {
              for (std::int64_t kx = 0; kx < kw; ++kx) {
                const std::int64_t iy = oy * s[0] - pads[0] + ky * d[0];
                const std::int64_t ix = ox * s[1] - pads[1] + kx * d[1];
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += double(w[std::size_t(((oc * cpg + ic) * kh + ky) * kw + kx)]) *
                       x.data[std::size_t(((b * cin + g * cpg + ic) * h + iy) * wd + ix)];
              }
            }
          }
          y[std::size_t(((b * cout + oc) * oh + oy) * ow + ox)] = acc;
        }
      }
    }
  }
  return y;
}

TEST(OnnxGraphTest, ConvWithPadsStridesAndBias) {
  ModelBuilder b;
  b.Input("x");
  const auto w = RandomFloats(3 * 2 * 3 * 3, 1);
  const auto bias = RandomFloats(3, 2);
  b.Init("w", {3, 2, 3, 3}, w);
  b.Init("b", {3}, bias, /*raw=*/false);
  auto* n = b.Node("Conv", {"x", "w", "b"}, {"y"});
  ModelBuilder::SetInts(n, "pads", {1, 0, 1, 2});
  ModelBuilder::SetInts(n, "strides", {2, 1});
  const Tensor x = MakeTensor({2, 2, 7, 6}, RandomFloats(2 * 2 * 7 * 6, 3));
  const Tensor y = RunOne(b, x);
  // H: (7 + 2 - 3) / 2 + 1 = 4; W: (6 + 2 - 3) / 1 + 1 = 6.
  ASSERT_EQ(y.shape, (std::vector<std::int64_t>{2, 3, 4, 6}));
  ExpectClose(y, ConvOracle(x, w, bias, 3, 3, 3, 1, {1, 0, 1, 2}, {2, 1}, {1, 1}, 4, 6));
}

TEST(OnnxGraphTest, GroupedDilatedConv) {
  ModelBuilder b;
  b.Input("x");
  const auto w = RandomFloats(4 * 2 * 2 * 3, 4);
  b.Init("w", {4, 2, 2, 3}, w);
  auto* n = b.Node("Conv", {"x", "w"}, {"y"});
  ModelBuilder::SetInt(n, "group", 2);
  ModelBuilder::SetInts(n, "dilations", {2, 1});
  const Tensor x = MakeTensor({1, 4, 6, 5}, RandomFloats(4 * 6 * 5, 5));
  const Tensor y = RunOne(b, x);
  ASSERT_EQ(y.shape, (std::vector<std::int64_t>{1, 4, 4, 3}));
  ExpectClose(y, ConvOracle(x, w, {}, 4, 2, 3, 2, {0, 0, 0, 0}, {1, 1}, {2, 1}, 4, 3));
}

TEST(OnnxGraphTest, PointwiseAndSameUpperConv) {
  ModelBuilder b;
  b.Input("x");
  const auto w1 = RandomFloats(5 * 3, 6);
  const auto w2 = RandomFloats(2 * 5 * 3 * 3, 7);
  b.Init("w1", {5, 3, 1, 1}, w1);
  b.Init("w2", {2, 5, 3, 3}, w2);
  b.Node("Conv", {"x", "w1"}, {"h"});
  auto* n = b.Node("Conv", {"h", "w2"}, {"y"});
  ModelBuilder::SetString(n, "auto_pad", "SAME_UPPER");
  ModelBuilder::SetInts(n, "strides", {2, 2});
  const Tensor x = MakeTensor({1, 3, 5, 4}, RandomFloats(3 * 5 * 4, 8));
  const OnnxGraph g = Build(b);
  const auto out = g.Run({{"x", x}}, {"h", "y"});
  const std::vector<double> h = ConvOracle(x, w1, {}, 5, 1, 1, 1, {0, 0, 0, 0}, {1, 1}, {1, 1}, 5, 4);
  ExpectClose(out.at("h"), h);
  // SAME_UPPER, stride 2: out (3, 2); total pad H = 2*2+3-5 = 2 -> (1, 1); W = 1*2+3-4 = 1 -> (0, 1).
  ASSERT_EQ(out.at("y").shape, (std::vector<std::int64_t>{1, 2, 3, 2}));
  ExpectClose(out.at("y"), ConvOracle(out.at("h"), w2, {}, 2, 3, 3, 1, {1, 0, 1, 1}, {2, 2},
                                      {1, 1}, 3, 2));
}

struct PoolCase {
  bool is_max;
  bool ceil;
  bool include_pad;
};

std::vector<double> PoolOracle(const Tensor& x, std::int64_t k, std::int64_t s, std::int64_t pb,
                               std::int64_t pe, std::int64_t oh, std::int64_t ow, PoolCase c) {
  const std::int64_t planes = x.shape[0] * x.shape[1], h = x.shape[2], w = x.shape[3];
  std::vector<double> y;
  for (std::int64_t p = 0; p < planes; ++p) {
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        const std::int64_t y0 = oy * s - pb, x0 = ox * s - pb;
        double best = -std::numeric_limits<double>::infinity(), sum = 0;
        std::int64_t valid = 0;
        for (std::int64_t iy = y0; iy < y0 + k; ++iy) {
          for (std::int64_t ix = x0; ix < x0 + k; ++ix) {
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
            const double v = x.data[std::size_t((p * h + iy) * w + ix)];
            best = std::max(best, v);
            sum += v;
            ++valid;
          }
        }
        if (c.is_max) {
          y.push_back(best);
        } else {
          const std::int64_t hy = std::min(y0 + k, h + pe) - y0;
          const std::int64_t hx = std::min(x0 + k, w + pe) - x0;
          y.push_back(sum / double(c.include_pad ? hy * hx : valid));
        }
      }
    }
  }
  return y;
}

TEST(OnnxGraphTest, PoolingVariants) {
  const Tensor x = MakeTensor({1, 2, 8, 8}, RandomFloats(2 * 64, 9));
  for (PoolCase c : {PoolCase{true, false, false}, PoolCase{true, true, false},
                     PoolCase{false, false, false}, PoolCase{false, true, false},
                     PoolCase{false, true, true}, PoolCase{false, false, true}}) {
    ModelBuilder b;
    b.Input("x");
    auto* n = b.Node(c.is_max ? "MaxPool" : "AveragePool", {"x"}, {"y"});
    ModelBuilder::SetInts(n, "kernel_shape", {3, 3});
    ModelBuilder::SetInts(n, "strides", {2, 2});
    ModelBuilder::SetInts(n, "pads", {1, 1, 1, 1});
    ModelBuilder::SetInt(n, "ceil_mode", c.ceil);
    if (!c.is_max) ModelBuilder::SetInt(n, "count_include_pad", c.include_pad);
    const Tensor y = RunOne(b, x);
    // floor((8 + 2 - 3) / 2) + 1 = 4; ceil gives 5 and the last window starts at 7 < 9.
    const std::int64_t o = c.ceil ? 5 : 4;
    ASSERT_EQ(y.shape, (std::vector<std::int64_t>{1, 2, o, o}));
    ExpectClose(y, PoolOracle(x, 3, 2, 1, 1, o, o, c), 1e-5);
  }
}

TEST(OnnxGraphTest, CeilModeDropsWindowStartingInTrailingPad) {
  ModelBuilder b;
  b.Input("x");
  auto* n = b.Node("MaxPool", {"x"}, {"y"});
  ModelBuilder::SetInts(n, "kernel_shape", {2, 2});
  ModelBuilder::SetInts(n, "strides", {2, 2});
  ModelBuilder::SetInts(n, "pads", {0, 0, 1, 1});
  ModelBuilder::SetInt(n, "ceil_mode", 1);
  // (4 + 1 - 2) / 2 ceil + 1 = 3, but window 3 would start at 4, inside the pad.
  const Tensor y = RunOne(b, MakeTensor({1, 1, 4, 4}, RandomFloats(16, 1)));
  EXPECT_EQ(y.shape, (std::vector<std::int64_t>{1, 1, 2, 2}));
}

TEST(OnnxGraphTest, BatchNormGemmAndReductions) {
  ModelBuilder b;
  b.Input("x");
  b.Init("scale", {2}, {2.0f, 0.5f});
  b.Init("bias", {2}, {1.0f, -1.0f});
  b.Init("mean", {2}, {0.5f, 0.0f});
  b.Init("var", {2}, {4.0f, 1.0f});
  auto* bn = b.Node("BatchNormalization", {"x", "scale", "bias", "mean", "var"}, {"bn"});
  ModelBuilder::SetFloat(bn, "epsilon", 0.0f);
  b.Node("GlobalAveragePool", {"bn"}, {"gap"});
  auto* rm = b.Node("ReduceMean", {"bn"}, {"rm"});
  ModelBuilder::SetInts(rm, "axes", {2, 3});
  ModelBuilder::SetInt(rm, "keepdims", 0);
  b.Node("Flatten", {"gap"}, {"flat"});
  b.Init("gw", {3, 2}, {1, 2, 3, 4, 5, 6});
  b.Init("gb", {3}, {0.5f, 0.25f, 0.0f});
  auto* gemm = b.Node("Gemm", {"flat", "gw", "gb"}, {"y"});
  ModelBuilder::SetInt(gemm, "transB", 1);
  ModelBuilder::SetFloat(gemm, "alpha", 2.0f);
  ModelBuilder::SetFloat(gemm, "beta", 3.0f);

  const Tensor x = MakeTensor({1, 2, 1, 3}, {0.5f, 2.5f, -1.5f, 1.0f, 2.0f, 3.0f});
  const OnnxGraph g = Build(b);
  const auto out = g.Run({{"x", x}}, {"bn", "gap", "rm", "y"});
  // bn = scale * (x - mean) / sqrt(var) + bias.
  ExpectClose(out.at("bn"), {1.0, 3.0, -1.0, -0.5, 0.0, 0.5}, 1e-6);
  ExpectClose(out.at("gap"), {1.0, 0.0}, 1e-6);
  EXPECT_EQ(out.at("rm").shape, (std::vector<std::int64_t>{1, 2}));
  ExpectClose(out.at("rm"), {1.0, 0.0}, 1e-6);
  // y = 2 * flat . gw^T + 3 * gb with flat = (1, 0).
  ExpectClose(out.at("y"), {2 * 1 + 1.5, 2 * 3 + 0.75, 2 * 5 + 0.0}, 1e-6);
}

TEST(OnnxGraphTest, ElementwiseBroadcastConcatReshape) {
  ModelBuilder b;
  b.Input("x");
  b.Init("c", {1, 3, 1}, {1.0f, 2.0f, 3.0f});
  b.Node("Add", {"x", "c"}, {"add"});
  b.Node("Mul", {"add", "c"}, {"mul"});
  b.Node("Sub", {"mul", "x"}, {"sub"});
  b.Node("Div", {"sub", "c"}, {"div"});
  b.Node("Relu", {"x"}, {"relu"});
  auto* cat = b.Node("Concat", {"x", "relu"}, {"cat"});
  ModelBuilder::SetInt(cat, "axis", -1);
  b.InitInt("shape", {2}, {0, -1});
  b.Node("Reshape", {"cat", "shape"}, {"reshaped"});
  b.Init("lo", {}, {-0.5f});
  b.Init("hi", {}, {0.5f});
  b.Node("Clip", {"x", "lo", "hi"}, {"clip"});
  b.Node("Identity", {"clip"}, {"id"});
  b.Node("Dropout", {"id"}, {"drop"});

  const std::vector<float> xv = {-1.0f, 0.25f, 2.0f, -0.75f, 0.0f, 1.0f};
  const Tensor x = MakeTensor({1, 3, 2}, xv);
  const OnnxGraph g = Build(b);
  const auto out = g.Run({{"x", x}}, {"div", "cat", "reshaped", "drop"});
  std::vector<double> div, drop;
  const double c[3] = {1, 2, 3};
  for (std::size_t i = 0; i < 6; ++i) {
    const double ci = c[i / 2];
    div.push_back(((xv[i] + ci) * ci - xv[i]) / ci);
    drop.push_back(std::clamp<double>(xv[i], -0.5, 0.5));
  }
  ExpectClose(out.at("div"), div, 1e-6);
  ExpectClose(out.at("drop"), drop, 1e-7);
  EXPECT_EQ(out.at("cat").shape, (std::vector<std::int64_t>{1, 3, 4}));
  ExpectClose(out.at("cat"), {-1, 0.25, 0, 0.25, 2, -0.75, 2, 0, 0, 1, 0, 1}, 1e-7);
  EXPECT_EQ(out.at("reshaped").shape, (std::vector<std::int64_t>{1, 12}));
}

TEST(OnnxGraphTest, ConstantNodes) {
  ModelBuilder b;
  b.Input("x");
  auto* k = b.Node("Constant", {}, {"k"});
  auto* a = k->add_attribute();
  a->set_name("value_float");
  a->set_type(onnx_pb::AttributeProto::FLOAT);
  a->set_f(2.5f);
  b.Node("Mul", {"x", "k"}, {"y"});
  ExpectClose(RunOne(b, MakeTensor({2}, {1.0f, -2.0f})), {2.5, -5.0}, 1e-7);
}

TEST(OnnxGraphTest, UnsupportedOperatorIsNamed) {
  ModelBuilder b;
  b.Input("x");
  b.Node("Relu", {"x"}, {"ok"});
  b.Node("Softsign", {"x"}, {"bad"});
  const OnnxGraph g = Build(b);
  EXPECT_NO_THROW(g.CheckSupported({"ok"}));
  EXPECT_NO_THROW(g.Run({{"x", MakeTensor({1}, {1.0f})}}, {"ok"}));
  try {
    g.CheckSupported({"bad"});
    FAIL() << "expected ModelIoError";
  } catch (const ModelIoError& e) {
    EXPECT_NE(std::string(e.what()).find("Softsign"), std::string::npos) << e.what();
  }
  EXPECT_THROW(g.CheckSupported({"nowhere"}), ModelIoError);
  const auto ops = SupportedOnnxOperators();
  EXPECT_NE(std::find(ops.begin(), ops.end(), "Conv"), ops.end());
}

TEST(OnnxGraphTest, MalformedInputs) {
  const std::uint8_t junk[] = {0xff, 0xff, 0xff, 0x01, 0x02};
  EXPECT_THROW(OnnxGraph::Parse(junk), ModelIoError);
  EXPECT_THROW(OnnxGraph::Load("/nonexistent/model.onnx"), ModelIoError);

  ModelBuilder b;
  b.Input("x");
  b.Init("w", {1, 2, 1, 1}, {1.0f, 1.0f});
  b.Node("Conv", {"x", "w"}, {"y"});
  const OnnxGraph g = Build(b);
  EXPECT_THROW(g.Run({{"x", MakeTensor({1, 3, 2, 2}, std::vector<float>(12))}}, {"y"}),
               ModelIoError);
  EXPECT_THROW(g.Run({}, {"y"}), ModelIoError);

  ModelBuilder ext;
  ext.Input("x");
  auto* t = ext.proto().mutable_graph()->add_initializer();
  t->set_name("w");
  t->set_data_type(onnx_pb::TensorProto::FLOAT);
  t->add_dims(1);
  t->set_data_location(onnx_pb::TensorProto::EXTERNAL);
  EXPECT_THROW(Build(ext), ModelIoError);
}

TEST(OnnxGraphTest, ReportsGraphInterface) {
  ModelBuilder b(17);
  b.Input("x");
  b.Init("w", {1}, {1.0f});
  b.Node("Add", {"x", "w"}, {"y"});
  b.Output("y");
  const OnnxGraph g = Build(b);
  EXPECT_EQ(g.input_names(), std::vector<std::string>{"x"});
  EXPECT_EQ(g.output_names(), std::vector<std::string>{"y"});
  EXPECT_EQ(g.opset(), 17);
  EXPECT_TRUE(g.HasValue("w"));
  EXPECT_FALSE(g.HasValue("z"));
}

class OnnxExtractorTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    manifest_ = testing::WriteModelDir(testing::MiniInception(), dir_->path() / "good");
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::filesystem::path Good() { return dir_->path() / "good" / "model.onnx"; }

  // Copies the good model into a fresh directory with an edited manifest.
  static std::filesystem::path WithManifest(const std::string& name,
                                            const std::function<void(nlohmann::json&)>& edit) {
    const auto d = dir_->path() / name;
    std::filesystem::create_directories(d);
    std::filesystem::copy_file(Good(), d / "model.onnx",
                               std::filesystem::copy_options::overwrite_existing);
    nlohmann::json m = manifest_;
    edit(m);
    std::ofstream(d / "manifest.json") << m.dump();
    return d / "model.onnx";
  }

  static TempDir* dir_;
  static nlohmann::json manifest_;
};

TempDir* OnnxExtractorTest::dir_ = nullptr;
nlohmann::json OnnxExtractorTest::manifest_;

TEST_F(OnnxExtractorTest, LoadsAndExtractsTapShapes) {
  const auto ex = OnnxExtractor::Load(Good(), {.threads = 2});
  EXPECT_EQ(ex->id(), manifest_["extractor_id"]);
  EXPECT_EQ(ex->id().size(), 64u);
  const std::vector<Image> images = {testing::SyntheticPhoto(64, 48, 1),
                                     testing::SyntheticPhoto(80, 80, 2)};
  const std::vector<ImageFeatures> f = ex->ExtractBatch(images);
  ASSERT_EQ(f.size(), 2u);
  for (const ImageFeatures& one : f) EXPECT_NO_THROW(CheckFeatures(one, ex->spec()));
  // Per-image results do not depend on batching.
  EXPECT_EQ(ex->Extract(images[1])[2].values, f[1][2].values);
  EXPECT_NE(f[0][0].values, f[1][0].values);
  // ReLU then max pooling keeps MaxPool1 non-negative.
  EXPECT_GE(*std::min_element(f[0][0].values.begin(), f[0][0].values.end()), 0.0f);
}

TEST_F(OnnxExtractorTest, GoldenRoundTrip) {
  const auto ex = OnnxExtractor::Load(Good());
  const auto gdir = dir_->path() / "good";
  SaveImage(testing::SyntheticPhoto(120, 90, 3), gdir / "reference.png");
  const ImageFeatures f = ex->Extract(LoadImage(gdir / "reference.png"));
  nlohmann::json levels;
  for (std::size_t l = 0; l < kLevelCount; ++l) {
    const ActivationChecksum c = Checksum(f[l].values);
    levels[f[l].level_name] = {{"mean", c.mean}, {"rms", c.rms}, {"max_abs", c.max_abs},
                               {"head", c.head}};
  }
  nlohmann::json golden = {{"extractor_id", ex->id()},
                           {"reference_image", "reference.png"},
                           {"reference_sha256", Sha256HexOfFile(gdir / "reference.png")},
                           {"levels", levels}};
  std::ofstream(gdir / "golden.json") << golden.dump();
  const GoldenCheck ok = VerifyGolden(*ex, gdir / "golden.json");
  EXPECT_TRUE(ok.ok) << ok.detail;
  EXPECT_LE(ok.worst_relative_error, 1e-12);

  golden["levels"]["AvgPool"]["rms"] = golden["levels"]["AvgPool"]["rms"].get<double>() * 1.01;
  std::ofstream(gdir / "golden_off.json") << golden.dump();
  const GoldenCheck off = VerifyGolden(*ex, gdir / "golden_off.json");
  EXPECT_FALSE(off.ok);
  EXPECT_NE(off.detail.find("AvgPool.rms"), std::string::npos);

  golden["extractor_id"] = std::string(64, '0');
  std::ofstream(gdir / "golden_id.json") << golden.dump();
  EXPECT_THROW(VerifyGolden(*ex, gdir / "golden_id.json"), ChecksumError);
}

TEST_F(OnnxExtractorTest, ChecksumFields) {
  const ActivationChecksum c = Checksum({3.0f, -4.0f});
  EXPECT_DOUBLE_EQ(c.mean, -0.5);
  EXPECT_DOUBLE_EQ(c.rms, std::sqrt(12.5));
  EXPECT_DOUBLE_EQ(c.max_abs, 4.0);
  EXPECT_EQ(c.head, (std::vector<double>{3.0, -4.0}));
}

TEST_F(OnnxExtractorTest, MissingModelOrManifest) {
  EXPECT_THROW(OnnxExtractor::Load(dir_->path() / "absent.onnx"), ModelIoError);
  EXPECT_THROW(OnnxExtractor::Load(Good(), {.manifest_path = dir_->path() / "none.json"}),
               ModelIoError);
  try {
    OnnxExtractor::Load(dir_->path() / "absent.onnx");
  } catch (const Error& e) {
    EXPECT_EQ(e.exit_code(), ExitCode::kIo);
  }
}

TEST_F(OnnxExtractorTest, ManifestMustDescribeTheseBytes) {
  EXPECT_THROW(OnnxExtractor::Load(WithManifest("hash", [](auto& m) {
                 m["extractor_id"] = std::string(64, 'a');
               })),
               ModelIoError);
  EXPECT_THROW(OnnxExtractor::Load(WithManifest("version", [](auto& m) {
                 m["format_version"] = 2;
               })),
               FormatVersionError);
}

TEST_F(OnnxExtractorTest, LevelTableDriftIsShapeMismatch) {
  EXPECT_THROW(OnnxExtractor::Load(WithManifest("drift", [](auto& m) {
                 m["levels"][1]["flat_dim"] = 235201;
               })),
               ShapeMismatch);
  EXPECT_THROW(OnnxExtractor::Load(WithManifest("order", [](auto& m) {
                 std::swap(m["levels"][0], m["levels"][1]);
               })),
               ShapeMismatch);
  EXPECT_THROW(OnnxExtractor::Load(WithManifest("side", [](auto& m) {
                 m["input"]["side"] = 224;
               })),
               ShapeMismatch);
}

TEST_F(OnnxExtractorTest, WrongTapShapeIsShapeMismatch) {
  const auto d = dir_->path() / "badshape";
  testing::WriteModelDir(testing::MiniInception(1, /*pool2_stride=*/1), d);
  try {
    OnnxExtractor::Load(d / "model.onnx");
    FAIL() << "expected ShapeMismatch";
  } catch (const ShapeMismatch& e) {
    EXPECT_NE(std::string(e.what()).find("MaxPool2"), std::string::npos) << e.what();
    EXPECT_EQ(e.exit_code(), ExitCode::kCompatibility);
  }
}

TEST_F(OnnxExtractorTest, MissingTapOrUnsupportedOp) {
  testing::ModelBuilder b = testing::MiniInception();
  b.proto().mutable_graph()->mutable_node(b.proto().graph().node_size() - 1)->set_op_type("Softsign");
  const auto d = dir_->path() / "unsupported";
  testing::WriteModelDir(b, d);
  EXPECT_THROW(OnnxExtractor::Load(d / "model.onnx"), ModelIoError);

  testing::ModelBuilder c = testing::MiniInception();
  c.proto().mutable_graph()->mutable_node(c.proto().graph().node_size() - 1)->set_output(0, "Pooled");
  const auto e = dir_->path() / "notap";
  testing::WriteModelDir(c, e);
  EXPECT_THROW(OnnxExtractor::Load(e / "model.onnx"), ShapeMismatch);
}

}  // namespace
}  // namespace cfid
