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

// Minimal CPU interpreter for ONNX inference graphs of convolutional image
// models. Supports the operators needed by pooled-feature taps of
// Inception-style networks (Conv, pooling, Concat, elementwise arithmetic,
// BatchNormalization, Gemm and a few shape operators) on float32 NCHW
// tensors. Only nodes that feed the requested outputs are evaluated.

#ifndef CFID_ONNX_GRAPH_HPP_
#define CFID_ONNX_GRAPH_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cfid {

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;
  // Integer tensors (shapes, axes) keep their values here instead of `data`.
  std::vector<std::int64_t> int_data;
  bool is_int = false;

  std::size_t numel() const;
  static Tensor Zeros(std::vector<std::int64_t> shape);
};

class OnnxGraph {
 public:
  struct Attribute {
    enum class Kind { kFloat, kInt, kString, kTensor, kFloats, kInts, kOther };
    Kind kind = Kind::kOther;
    float f = 0.0f;
    std::int64_t i = 0;
    std::string s;
    Tensor t;
    std::vector<float> floats;
    std::vector<std::int64_t> ints;
  };

  struct Node {
    std::string name;
    std::string op_type;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::map<std::string, Attribute> attributes;
  };

  // Throws ModelIoError if the file is missing or is not a parseable model.
  static OnnxGraph Load(const std::filesystem::path& path);
  static OnnxGraph Parse(std::span<const std::uint8_t> bytes);

  // Graph inputs that are not initializers.
  const std::vector<std::string>& input_names() const { return inputs_; }
  const std::vector<std::string>& output_names() const { return outputs_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::int64_t opset() const { return opset_; }

  // True if `name` is a graph input, an initializer or a node output.
  bool HasValue(const std::string& name) const;

  // Throws ModelIoError naming the first operator needed for `fetches` that
  // is not implemented, or a value with no producer.
  void CheckSupported(const std::vector<std::string>& fetches) const;

  // Evaluates `fetches` given `feeds`. Deterministic; safe to call
  // concurrently. Throws ModelIoError on malformed graphs or shape errors.
  std::unordered_map<std::string, Tensor> Run(
      const std::unordered_map<std::string, Tensor>& feeds,
      const std::vector<std::string>& fetches) const;

 private:
  std::vector<std::size_t> NeededNodes(const std::vector<std::string>& fetches) const;

  std::vector<Node> nodes_;
  std::unordered_map<std::string, Tensor> initializers_;
  std::unordered_map<std::string, std::size_t> producer_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::int64_t opset_ = 0;
};

// Names of the operators Run() implements, sorted.
std::vector<std::string> SupportedOnnxOperators();

}  // namespace cfid

#endif  // CFID_ONNX_GRAPH_HPP_
