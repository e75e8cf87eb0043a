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

#include "cfid/onnx_graph.hpp"

#include <Eigen/Core>
#include <google/protobuf/io/coded_stream.h>
#include <google/protobuf/io/zero_copy_stream_impl_lite.h>

#include <algorithm>
#include <bit>
#include <climits>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_set>

#include "cfid/errors.hpp"
#include "onnx_subset.pb.h"

namespace cfid {

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (std::int64_t d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

Tensor Tensor::Zeros(std::vector<std::int64_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(t.numel(), 0.0f);
  return t;
}

namespace {

using Attribute = OnnxGraph::Attribute;
using Node = OnnxGraph::Node;
namespace pb = onnx_pb;

[[noreturn]] void Fail(const Node& node, const std::string& message) {
  throw ModelIoError(node.op_type + " node '" + node.name + "': " + message);
}

template <typename T>
std::vector<T> FromRaw(const std::string& raw, std::size_t count) {
  if (raw.size() != count * sizeof(T)) {
    throw ModelIoError("tensor raw_data has " + std::to_string(raw.size()) +
                       " bytes, expected " + std::to_string(count * sizeof(T)));
  }
  std::vector<T> out(count);
  if (count > 0) std::memcpy(out.data(), raw.data(), raw.size());
  static_assert(std::endian::native == std::endian::little);
  return out;
}

Tensor ConvertTensor(const pb::TensorProto& proto) {
  if (proto.data_location() == pb::TensorProto::EXTERNAL ||
      proto.external_data_size() > 0) {
    throw ModelIoError("tensor '" + proto.name() +
                       "' uses external data, which is not supported; export "
                       "the model as a single file");
  }
  Tensor t;
  t.shape.assign(proto.dims().begin(), proto.dims().end());
  for (std::int64_t d : t.shape) {
    if (d < 0) throw ModelIoError("tensor '" + proto.name() + "' has a negative dim");
  }
  const std::size_t n = t.numel();
  const bool raw = proto.has_raw_data();
  switch (proto.data_type()) {
    case pb::TensorProto::FLOAT:
      t.data = raw ? FromRaw<float>(proto.raw_data(), n)
                   : std::vector<float>(proto.float_data().begin(),
                                        proto.float_data().end());
      break;
    case pb::TensorProto::DOUBLE: {
      const std::vector<double> d =
          raw ? FromRaw<double>(proto.raw_data(), n)
              : std::vector<double>(proto.double_data().begin(),
                                    proto.double_data().end());
      t.data.assign(d.begin(), d.end());
      break;
    }
    case pb::TensorProto::INT64:
      t.is_int = true;
      t.int_data = raw ? FromRaw<std::int64_t>(proto.raw_data(), n)
                       : std::vector<std::int64_t>(proto.int64_data().begin(),
                                                   proto.int64_data().end());
      break;
    case pb::TensorProto::INT32: {
      t.is_int = true;
      if (raw) {
        const std::vector<std::int32_t> v = FromRaw<std::int32_t>(proto.raw_data(), n);
        t.int_data.assign(v.begin(), v.end());
      } else {
        t.int_data.assign(proto.int32_data().begin(), proto.int32_data().end());
      }
      break;
    }
    default:
      throw ModelIoError("tensor '" + proto.name() + "' has unsupported data type " +
                         std::to_string(proto.data_type()));
  }
  const std::size_t have = t.is_int ? t.int_data.size() : t.data.size();
  if (have != n) {
    throw ModelIoError("tensor '" + proto.name() + "' holds " + std::to_string(have) +
                       " values for " + std::to_string(n) + " elements");
  }
  return t;
}

Attribute ConvertAttribute(const pb::AttributeProto& proto) {
  Attribute a;
  switch (proto.type()) {
    case pb::AttributeProto::FLOAT:
      a.kind = Attribute::Kind::kFloat;
      a.f = proto.f();
      break;
    case pb::AttributeProto::INT:
      a.kind = Attribute::Kind::kInt;
      a.i = proto.i();
      break;
    case pb::AttributeProto::STRING:
      a.kind = Attribute::Kind::kString;
      a.s = proto.s();
      break;
    case pb::AttributeProto::TENSOR:
      a.kind = Attribute::Kind::kTensor;
      a.t = ConvertTensor(proto.t());
      break;
    case pb::AttributeProto::FLOATS:
      a.kind = Attribute::Kind::kFloats;
      a.floats.assign(proto.floats().begin(), proto.floats().end());
      break;
    case pb::AttributeProto::INTS:
      a.kind = Attribute::Kind::kInts;
      a.ints.assign(proto.ints().begin(), proto.ints().end());
      break;
    default:
      a.kind = Attribute::Kind::kOther;
      break;
  }
  return a;
}

// ---------------------------------------------------------------------------
// Attribute helpers.

const Attribute* FindAttr(const Node& node, const std::string& name) {
  auto it = node.attributes.find(name);
  return it == node.attributes.end() ? nullptr : &it->second;
}

std::int64_t AttrInt(const Node& node, const std::string& name, std::int64_t fallback) {
  const Attribute* a = FindAttr(node, name);
  if (a == nullptr) return fallback;
  if (a->kind != Attribute::Kind::kInt) Fail(node, "attribute " + name + " is not an int");
  return a->i;
}

float AttrFloat(const Node& node, const std::string& name, float fallback) {
  const Attribute* a = FindAttr(node, name);
  if (a == nullptr) return fallback;
  if (a->kind != Attribute::Kind::kFloat) Fail(node, "attribute " + name + " is not a float");
  return a->f;
}

std::string AttrString(const Node& node, const std::string& name, std::string fallback) {
  const Attribute* a = FindAttr(node, name);
  if (a == nullptr) return fallback;
  if (a->kind != Attribute::Kind::kString) Fail(node, "attribute " + name + " is not a string");
  return a->s;
}

std::vector<std::int64_t> AttrInts(const Node& node, const std::string& name,
                                   std::vector<std::int64_t> fallback) {
  const Attribute* a = FindAttr(node, name);
  if (a == nullptr) return fallback;
  if (a->kind != Attribute::Kind::kInts) Fail(node, "attribute " + name + " is not ints");
  return a->ints;
}

const Tensor& RequireFloat(const Node& node, const Tensor* t, std::size_t index) {
  if (t == nullptr) Fail(node, "missing input " + std::to_string(index));
  if (t->is_int) Fail(node, "input " + std::to_string(index) + " must be float");
  return *t;
}

void RequireRank(const Node& node, const Tensor& t, std::size_t rank) {
  if (t.shape.size() != rank) {
    Fail(node, "expected a rank-" + std::to_string(rank) + " tensor, got rank " +
                   std::to_string(t.shape.size()));
  }
}

// C = alpha * op(A) * op(B) + beta * C on row-major buffers.
void Sgemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
           float alpha, const float* a, std::int64_t lda, const float* b, std::int64_t ldb,
           float beta, float* c, std::int64_t ldc) {
  using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Stride = Eigen::OuterStride<>;
  const Eigen::Map<const Matrix, 0, Stride> am(a, trans_a ? k : m, trans_a ? m : k, Stride(lda));
  const Eigen::Map<const Matrix, 0, Stride> bm(b, trans_b ? n : k, trans_b ? k : n, Stride(ldb));
  Eigen::Map<Matrix, 0, Stride> cm(c, m, n, Stride(ldc));
  if (beta == 0.0f) {
    cm.setZero();
  } else if (beta != 1.0f) {
    cm *= beta;
  }
  if (trans_a && trans_b) {
    cm.noalias() += alpha * am.transpose() * bm.transpose();
  } else if (trans_a) {
    cm.noalias() += alpha * am.transpose() * bm;
  } else if (trans_b) {
    cm.noalias() += alpha * am * bm.transpose();
  } else {
    cm.noalias() += alpha * am * bm;
  }
}

// ---------------------------------------------------------------------------
// Spatial geometry shared by Conv and the pooling operators.

struct Window2d {
  std::int64_t kernel[2];
  std::int64_t stride[2];
  std::int64_t dilation[2];
  std::int64_t pad_begin[2];
  std::int64_t pad_end[2];
  std::int64_t out[2];
};

Window2d ResolveWindow(const Node& node, std::int64_t in_h, std::int64_t in_w,
                       std::int64_t k_h, std::int64_t k_w, bool ceil_mode) {
  Window2d w{};
  w.kernel[0] = k_h;
  w.kernel[1] = k_w;
  const std::vector<std::int64_t> strides = AttrInts(node, "strides", {1, 1});
  const std::vector<std::int64_t> dilations = AttrInts(node, "dilations", {1, 1});
  std::vector<std::int64_t> pads = AttrInts(node, "pads", {0, 0, 0, 0});
  if (strides.size() != 2 || dilations.size() != 2 || pads.size() != 4) {
    Fail(node, "only 2-D windows are supported");
  }
  const std::int64_t in[2] = {in_h, in_w};
  const std::string auto_pad = AttrString(node, "auto_pad", "NOTSET");
  for (int i = 0; i < 2; ++i) {
    w.stride[i] = strides[i];
    w.dilation[i] = dilations[i];
    if (w.stride[i] <= 0 || w.dilation[i] <= 0 || w.kernel[i] <= 0) {
      Fail(node, "non-positive kernel, stride or dilation");
    }
    const std::int64_t extent = (w.kernel[i] - 1) * w.dilation[i] + 1;
    if (auto_pad == "SAME_UPPER" || auto_pad == "SAME_LOWER") {
      const std::int64_t out = (in[i] + w.stride[i] - 1) / w.stride[i];
      const std::int64_t total =
          std::max<std::int64_t>(0, (out - 1) * w.stride[i] + extent - in[i]);
      const std::int64_t small = total / 2;
      w.pad_begin[i] = auto_pad == "SAME_UPPER" ? small : total - small;
      w.pad_end[i] = total - w.pad_begin[i];
    } else if (auto_pad == "VALID") {
      w.pad_begin[i] = 0;
      w.pad_end[i] = 0;
    } else if (auto_pad == "NOTSET") {
      w.pad_begin[i] = pads[i];
      w.pad_end[i] = pads[i + 2];
    } else {
      Fail(node, "unknown auto_pad '" + auto_pad + "'");
    }
    const std::int64_t span = in[i] + w.pad_begin[i] + w.pad_end[i] - extent;
    if (span < 0) Fail(node, "window is larger than the padded input");
    if (ceil_mode) {
      w.out[i] = (span + w.stride[i] - 1) / w.stride[i] + 1;
      // The last window must start inside the input or the leading pad.
      if ((w.out[i] - 1) * w.stride[i] >= in[i] + w.pad_begin[i]) --w.out[i];
    } else {
      w.out[i] = span / w.stride[i] + 1;
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Operators.

Tensor Conv(const Node& node, const Tensor& x, const Tensor& weight, const Tensor* bias) {
  RequireRank(node, x, 4);
  RequireRank(node, weight, 4);
  const std::int64_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const std::int64_t m = weight.shape[0], cg = weight.shape[1];
  const std::int64_t group = AttrInt(node, "group", 1);
  if (group <= 0 || cg * group != c || m % group != 0) {
    Fail(node, "channel counts do not match the weight and group");
  }
  const std::vector<std::int64_t> ks = AttrInts(node, "kernel_shape", {weight.shape[2], weight.shape[3]});
  if (ks.size() != 2 || ks[0] != weight.shape[2] || ks[1] != weight.shape[3]) {
    Fail(node, "kernel_shape does not match the weight");
  }
  if (bias != nullptr && bias->numel() != static_cast<std::size_t>(m)) {
    Fail(node, "bias size does not match output channels");
  }
  const Window2d w = ResolveWindow(node, h, wd, ks[0], ks[1], false);
  const std::int64_t oh = w.out[0], ow = w.out[1];
  const std::int64_t mg = m / group;
  const std::int64_t kk = cg * ks[0] * ks[1];
  const std::int64_t p = oh * ow;

  Tensor y = Tensor::Zeros({n, m, oh, ow});
  const bool pointwise = ks[0] == 1 && ks[1] == 1 && w.stride[0] == 1 && w.stride[1] == 1 &&
                         w.pad_begin[0] == 0 && w.pad_begin[1] == 0 && w.pad_end[0] == 0 &&
                         w.pad_end[1] == 0;
  std::vector<float> col;
  if (!pointwise) col.resize(static_cast<std::size_t>(kk * p));

  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t g = 0; g < group; ++g) {
      const float* src = x.data.data() + (b * c + g * cg) * h * wd;
      const float* cols = src;
      if (!pointwise) {
        float* dst = col.data();
        for (std::int64_t ci = 0; ci < cg; ++ci) {
          for (std::int64_t ky = 0; ky < ks[0]; ++ky) {
            for (std::int64_t kx = 0; kx < ks[1]; ++kx) {
              for (std::int64_t oy = 0; oy < oh; ++oy) {
                const std::int64_t iy = oy * w.stride[0] - w.pad_begin[0] + ky * w.dilation[0];
                if (iy < 0 || iy >= h) {
                  std::fill_n(dst, ow, 0.0f);
                  dst += ow;
                  continue;
                }
                const float* row = src + (ci * h + iy) * wd;
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                  const std::int64_t ix = ox * w.stride[1] - w.pad_begin[1] + kx * w.dilation[1];
                  *dst++ = (ix < 0 || ix >= wd) ? 0.0f : row[ix];
                }
              }
            }
          }
        }
        cols = col.data();
      }
      float* out = y.data.data() + (b * m + g * mg) * p;
      Sgemm(false, false, mg, p, kk, 1.0f, weight.data.data() + g * mg * kk, kk, cols, p,
            0.0f, out, p);
    }
    if (bias != nullptr) {
      for (std::int64_t oc = 0; oc < m; ++oc) {
        float* out = y.data.data() + (b * m + oc) * p;
        const float v = bias->data[static_cast<std::size_t>(oc)];
        for (std::int64_t i = 0; i < p; ++i) out[i] += v;
      }
    }
  }
  return y;
}

Tensor Pool(const Node& node, const Tensor& x, bool is_max) {
  RequireRank(node, x, 4);
  const std::vector<std::int64_t> ks = AttrInts(node, "kernel_shape", {});
  if (ks.size() != 2) Fail(node, "kernel_shape must have two entries");
  const bool ceil_mode = AttrInt(node, "ceil_mode", 0) != 0;
  const bool include_pad = AttrInt(node, "count_include_pad", 0) != 0;
  const std::int64_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const Window2d w = ResolveWindow(node, h, wd, ks[0], ks[1], ceil_mode);
  if (!is_max && (w.dilation[0] != 1 || w.dilation[1] != 1)) {
    Fail(node, "dilated average pooling is not supported");
  }
  const std::int64_t oh = w.out[0], ow = w.out[1];
  Tensor y = Tensor::Zeros({n, c, oh, ow});
  for (std::int64_t plane = 0; plane < n * c; ++plane) {
    const float* src = x.data.data() + plane * h * wd;
    float* dst = y.data.data() + plane * oh * ow;
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      const std::int64_t y0 = oy * w.stride[0] - w.pad_begin[0];
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        const std::int64_t x0 = ox * w.stride[1] - w.pad_begin[1];
        if (is_max) {
          float best = -std::numeric_limits<float>::infinity();
          for (std::int64_t ky = 0; ky < ks[0]; ++ky) {
            const std::int64_t iy = y0 + ky * w.dilation[0];
            if (iy < 0 || iy >= h) continue;
            for (std::int64_t kx = 0; kx < ks[1]; ++kx) {
              const std::int64_t ix = x0 + kx * w.dilation[1];
              if (ix < 0 || ix >= wd) continue;
              best = std::max(best, src[iy * wd + ix]);
            }
          }
          dst[oy * ow + ox] = best;
        } else {
          // Window clipped to the padded extent, then to the input.
          const std::int64_t y1 = std::min(y0 + ks[0], h + w.pad_end[0]);
          const std::int64_t x1 = std::min(x0 + ks[1], wd + w.pad_end[1]);
          const std::int64_t padded_count = (y1 - y0) * (x1 - x0);
          const std::int64_t ya = std::max<std::int64_t>(y0, 0), yb = std::min(y1, h);
          const std::int64_t xa = std::max<std::int64_t>(x0, 0), xb = std::min(x1, wd);
          float sum = 0.0f;
          for (std::int64_t iy = ya; iy < yb; ++iy) {
            for (std::int64_t ix = xa; ix < xb; ++ix) sum += src[iy * wd + ix];
          }
          const std::int64_t count = include_pad ? padded_count : (yb - ya) * (xb - xa);
          dst[oy * ow + ox] = count > 0 ? sum / static_cast<float>(count) : 0.0f;
        }
      }
    }
  }
  return y;
}

Tensor GlobalAveragePool(const Node& node, const Tensor& x) {
  if (x.shape.size() < 3) Fail(node, "input must have spatial dimensions");
  const std::int64_t n = x.shape[0], c = x.shape[1];
  const std::int64_t spatial = static_cast<std::int64_t>(x.numel()) / std::max<std::int64_t>(n * c, 1);
  std::vector<std::int64_t> shape(x.shape.size(), 1);
  shape[0] = n;
  shape[1] = c;
  Tensor y = Tensor::Zeros(shape);
  for (std::int64_t plane = 0; plane < n * c; ++plane) {
    const float* src = x.data.data() + plane * spatial;
    float sum = 0.0f;
    for (std::int64_t i = 0; i < spatial; ++i) sum += src[i];
    y.data[static_cast<std::size_t>(plane)] = sum / static_cast<float>(spatial);
  }
  return y;
}

std::int64_t NormalizeAxis(const Node& node, std::int64_t axis, std::size_t rank) {
  const std::int64_t r = static_cast<std::int64_t>(rank);
  if (axis < -r || axis >= r) Fail(node, "axis " + std::to_string(axis) + " out of range");
  return axis < 0 ? axis + r : axis;
}

Tensor Concat(const Node& node, const std::vector<const Tensor*>& inputs) {
  if (inputs.empty()) Fail(node, "no inputs");
  const Tensor& first = *inputs[0];
  const std::int64_t axis = NormalizeAxis(node, AttrInt(node, "axis", 1), first.shape.size());
  std::vector<std::int64_t> shape = first.shape;
  shape[axis] = 0;
  for (const Tensor* t : inputs) {
    if (t == nullptr || t->is_int != first.is_int || t->shape.size() != first.shape.size()) {
      Fail(node, "inputs disagree in rank or type");
    }
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (static_cast<std::int64_t>(d) != axis && t->shape[d] != first.shape[d]) {
        Fail(node, "inputs disagree outside the concat axis");
      }
    }
    shape[axis] += t->shape[axis];
  }
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];

  Tensor y;
  y.shape = shape;
  y.is_int = first.is_int;
  if (y.is_int) {
    y.int_data.resize(y.numel());
  } else {
    y.data.resize(y.numel());
  }
  std::int64_t offset = 0;
  for (const Tensor* t : inputs) {
    const std::int64_t block = t->shape[axis] * inner;
    for (std::int64_t o = 0; o < outer; ++o) {
      const std::int64_t dst = o * shape[axis] * inner + offset;
      if (y.is_int) {
        std::copy_n(t->int_data.data() + o * block, block, y.int_data.data() + dst);
      } else {
        std::copy_n(t->data.data() + o * block, block, y.data.data() + dst);
      }
    }
    offset += block;
  }
  return y;
}

std::vector<std::int64_t> BroadcastShape(const Node& node, const std::vector<std::int64_t>& a,
                                         const std::vector<std::int64_t>& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  std::vector<std::int64_t> out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) Fail(node, "shapes cannot be broadcast");
    out[i] = da == 1 ? db : da;
  }
  return out;
}

std::vector<std::int64_t> BroadcastStrides(const std::vector<std::int64_t>& shape,
                                           std::size_t rank) {
  std::vector<std::int64_t> strides(rank, 0);
  std::int64_t s = 1;
  for (std::size_t i = shape.size(); i-- > 0;) {
    const std::size_t o = i + rank - shape.size();
    strides[o] = shape[i] == 1 ? 0 : s;
    s *= shape[i];
  }
  return strides;
}

template <typename T, typename Op>
std::vector<T> BroadcastApply(const std::vector<T>& a, const std::vector<std::int64_t>& as,
                              const std::vector<T>& b, const std::vector<std::int64_t>& bs,
                              const std::vector<std::int64_t>& out_shape, Op op) {
  std::size_t total = 1;
  for (std::int64_t d : out_shape) total *= static_cast<std::size_t>(d);
  std::vector<T> out(total);
  if (as == bs) {
    for (std::size_t i = 0; i < total; ++i) out[i] = op(a[i], b[i]);
    return out;
  }
  if (b.size() == 1 && as == out_shape) {
    for (std::size_t i = 0; i < total; ++i) out[i] = op(a[i], b[0]);
    return out;
  }
  const std::size_t rank = out_shape.size();
  const std::vector<std::int64_t> sa = BroadcastStrides(as, rank);
  const std::vector<std::int64_t> sb = BroadcastStrides(bs, rank);
  std::vector<std::int64_t> index(rank, 0);
  std::int64_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < total; ++i) {
    out[i] = op(a[static_cast<std::size_t>(ia)], b[static_cast<std::size_t>(ib)]);
    for (std::size_t d = rank; d-- > 0;) {
      ++index[d];
      ia += sa[d];
      ib += sb[d];
      if (index[d] < out_shape[d]) break;
      ia -= sa[d] * index[d];
      ib -= sb[d] * index[d];
      index[d] = 0;
    }
  }
  return out;
}

Tensor Binary(const Node& node, const Tensor* a, const Tensor* b) {
  if (a == nullptr || b == nullptr) Fail(node, "needs two inputs");
  if (a->is_int != b->is_int) Fail(node, "mixed integer and float inputs");
  const std::string& op = node.op_type;
  Tensor y;
  y.shape = BroadcastShape(node, a->shape, b->shape);
  y.is_int = a->is_int;
  auto run = [&](const auto& av, const auto& bv) {
    using T = typename std::decay_t<decltype(av)>::value_type;
    if (op == "Add") return BroadcastApply(av, a->shape, bv, b->shape, y.shape, std::plus<T>());
    if (op == "Sub") return BroadcastApply(av, a->shape, bv, b->shape, y.shape, std::minus<T>());
    if (op == "Mul") {
      return BroadcastApply(av, a->shape, bv, b->shape, y.shape, std::multiplies<T>());
    }
    if constexpr (std::is_integral_v<T>) {
      return BroadcastApply(av, a->shape, bv, b->shape, y.shape, [&](T p, T q) {
        if (q == 0) Fail(node, "integer division by zero");
        return p / q;
      });
    } else {
      return BroadcastApply(av, a->shape, bv, b->shape, y.shape, std::divides<T>());
    }
  };
  if (y.is_int) {
    y.int_data = run(a->int_data, b->int_data);
  } else {
    y.data = run(a->data, b->data);
  }
  return y;
}

Tensor Flatten(const Node& node, const Tensor& x) {
  const std::int64_t rank = static_cast<std::int64_t>(x.shape.size());
  std::int64_t axis = AttrInt(node, "axis", 1);
  if (axis < -rank || axis > rank) Fail(node, "axis out of range");
  if (axis < 0) axis += rank;
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t d = 0; d < axis; ++d) outer *= x.shape[d];
  for (std::int64_t d = axis; d < rank; ++d) inner *= x.shape[d];
  Tensor y = x;
  y.shape = {outer, inner};
  return y;
}

Tensor Reshape(const Node& node, const Tensor& x, const Tensor* shape_tensor) {
  if (shape_tensor == nullptr || !shape_tensor->is_int) Fail(node, "shape input must be int64");
  const bool allow_zero = AttrInt(node, "allowzero", 0) != 0;
  std::vector<std::int64_t> shape = shape_tensor->int_data;
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 0 && !allow_zero) {
      if (i >= x.shape.size()) Fail(node, "zero dim copies a missing input dim");
      shape[i] = x.shape[i];
    }
    if (shape[i] == -1) {
      if (infer >= 0) Fail(node, "more than one -1 in shape");
      infer = static_cast<int>(i);
    } else if (shape[i] < 0) {
      Fail(node, "negative dim in shape");
    } else {
      known *= shape[i];
    }
  }
  const std::int64_t total = static_cast<std::int64_t>(x.numel());
  if (infer >= 0) {
    if (known == 0 || total % known != 0) Fail(node, "cannot infer the -1 dim");
    shape[infer] = total / known;
  } else if (known != total) {
    Fail(node, "element count changes");
  }
  Tensor y = x;
  y.shape = std::move(shape);
  return y;
}

Tensor Gemm(const Node& node, const Tensor& a, const Tensor& b, const Tensor* c) {
  RequireRank(node, a, 2);
  RequireRank(node, b, 2);
  const bool ta = AttrInt(node, "transA", 0) != 0;
  const bool tb = AttrInt(node, "transB", 0) != 0;
  const float alpha = AttrFloat(node, "alpha", 1.0f);
  const float beta = AttrFloat(node, "beta", 1.0f);
  const std::int64_t m = ta ? a.shape[1] : a.shape[0];
  const std::int64_t k = ta ? a.shape[0] : a.shape[1];
  const std::int64_t kb = tb ? b.shape[1] : b.shape[0];
  const std::int64_t n = tb ? b.shape[0] : b.shape[1];
  if (k != kb) Fail(node, "inner dimensions differ");
  Tensor y = Tensor::Zeros({m, n});
  if (c != nullptr && beta != 0.0f) {
    if (c->is_int) Fail(node, "C must be float");
    const std::vector<std::int64_t> shape = BroadcastShape(node, c->shape, y.shape);
    if (shape != y.shape) Fail(node, "C does not broadcast to the output");
    y.data = BroadcastApply(c->data, c->shape, y.data, y.shape, y.shape,
                            [beta](float p, float) { return beta * p; });
  }
  Sgemm(ta, tb, m, n, k, alpha, a.data.data(), a.shape[1], b.data.data(), b.shape[1],
        c != nullptr && beta != 0.0f ? 1.0f : 0.0f, y.data.data(), n);
  return y;
}

Tensor BatchNorm(const Node& node, const Tensor& x, const Tensor& scale, const Tensor& bias,
                 const Tensor& mean, const Tensor& var) {
  if (x.shape.size() < 2) Fail(node, "input needs a channel axis");
  const std::int64_t n = x.shape[0], c = x.shape[1];
  const std::size_t cc = static_cast<std::size_t>(c);
  if (scale.numel() != cc || bias.numel() != cc || mean.numel() != cc || var.numel() != cc) {
    Fail(node, "parameter sizes do not match channels");
  }
  const float eps = AttrFloat(node, "epsilon", 1e-5f);
  const std::int64_t spatial = static_cast<std::int64_t>(x.numel()) / std::max<std::int64_t>(n * c, 1);
  Tensor y = x;
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const std::size_t i = static_cast<std::size_t>(ch);
      const float s = scale.data[i] / std::sqrt(var.data[i] + eps);
      const float t = bias.data[i] - mean.data[i] * s;
      float* p = y.data.data() + (b * c + ch) * spatial;
      for (std::int64_t k = 0; k < spatial; ++k) p[k] = p[k] * s + t;
    }
  }
  return y;
}

Tensor ReduceMean(const Node& node, const Tensor& x, const Tensor* axes_input) {
  std::vector<std::int64_t> axes;
  if (axes_input != nullptr) {
    if (!axes_input->is_int) Fail(node, "axes input must be int64");
    axes = axes_input->int_data;
  } else {
    axes = AttrInts(node, "axes", {});
  }
  const bool keepdims = AttrInt(node, "keepdims", 1) != 0;
  const std::size_t rank = x.shape.size();
  std::vector<bool> reduce(rank, axes.empty());
  for (std::int64_t a : axes) reduce[NormalizeAxis(node, a, rank)] = true;

  std::vector<std::int64_t> kept(rank);
  std::int64_t count = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    kept[d] = reduce[d] ? 1 : x.shape[d];
    if (reduce[d]) count *= x.shape[d];
  }
  const std::vector<std::int64_t> out_strides = BroadcastStrides(kept, rank);
  std::size_t out_numel = 1;
  for (std::int64_t d : kept) out_numel *= static_cast<std::size_t>(d);
  std::vector<double> acc(out_numel, 0.0);
  std::vector<std::int64_t> index(rank, 0);
  std::int64_t io = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    acc[static_cast<std::size_t>(io)] += x.data[i];
    for (std::size_t d = rank; d-- > 0;) {
      ++index[d];
      io += out_strides[d];
      if (index[d] < x.shape[d]) break;
      io -= out_strides[d] * index[d];
      index[d] = 0;
    }
  }
  Tensor y;
  for (std::size_t d = 0; d < rank; ++d) {
    if (!reduce[d] || keepdims) y.shape.push_back(kept[d]);
  }
  y.data.resize(out_numel);
  for (std::size_t i = 0; i < out_numel; ++i) {
    y.data[i] = static_cast<float>(acc[i] / static_cast<double>(count));
  }
  return y;
}

float ScalarOr(const Node& node, const Tensor* t, float fallback) {
  if (t == nullptr) return fallback;
  if (t->is_int || t->numel() != 1) Fail(node, "bound must be a float scalar");
  return t->data[0];
}

Tensor ConstantValue(const Node& node) {
  if (const Attribute* a = FindAttr(node, "value"); a != nullptr) {
    if (a->kind != Attribute::Kind::kTensor) Fail(node, "value is not a tensor");
    return a->t;
  }
  Tensor t;
  if (const Attribute* a = FindAttr(node, "value_float"); a != nullptr) {
    t.data = {a->f};
  } else if (const Attribute* a = FindAttr(node, "value_floats"); a != nullptr) {
    t.data = a->floats;
    t.shape = {static_cast<std::int64_t>(a->floats.size())};
  } else if (const Attribute* a = FindAttr(node, "value_int"); a != nullptr) {
    t.is_int = true;
    t.int_data = {a->i};
  } else if (const Attribute* a = FindAttr(node, "value_ints"); a != nullptr) {
    t.is_int = true;
    t.int_data = a->ints;
    t.shape = {static_cast<std::int64_t>(a->ints.size())};
  } else {
    Fail(node, "no supported value attribute");
  }
  return t;
}

const std::set<std::string>& SupportedSet() {
  static const std::set<std::string> ops = {
      "Add",     "AveragePool", "BatchNormalization", "Clip",    "Concat",
      "Constant", "Conv",       "Div",                "Dropout", "Flatten",
      "Gemm",    "GlobalAveragePool", "Identity",     "MaxPool", "Mul",
      "ReduceMean", "Relu",     "Reshape",            "Sub"};
  return ops;
}

std::vector<Tensor> Execute(const Node& node, const std::vector<const Tensor*>& in,
                            std::int64_t opset) {
  auto input = [&](std::size_t i) -> const Tensor* {
    return i < in.size() ? in[i] : nullptr;
  };
  const std::string& op = node.op_type;
  if (op == "Conv") {
    return {Conv(node, RequireFloat(node, input(0), 0), RequireFloat(node, input(1), 1),
                 input(2))};
  }
  if (op == "MaxPool" || op == "AveragePool") {
    if (node.outputs.size() > 1 && !node.outputs[1].empty()) {
      Fail(node, "the Indices output is not supported");
    }
    return {Pool(node, RequireFloat(node, input(0), 0), op == "MaxPool")};
  }
  if (op == "GlobalAveragePool") return {GlobalAveragePool(node, RequireFloat(node, input(0), 0))};
  if (op == "Relu") {
    Tensor y = RequireFloat(node, input(0), 0);
    for (float& v : y.data) v = std::max(v, 0.0f);
    return {std::move(y)};
  }
  if (op == "Clip") {
    Tensor y = RequireFloat(node, input(0), 0);
    float lo = -std::numeric_limits<float>::infinity();
    float hi = std::numeric_limits<float>::infinity();
    if (opset < 11) {
      lo = AttrFloat(node, "min", lo);
      hi = AttrFloat(node, "max", hi);
    } else {
      lo = ScalarOr(node, input(1), lo);
      hi = ScalarOr(node, input(2), hi);
    }
    for (float& v : y.data) v = std::min(std::max(v, lo), hi);
    return {std::move(y)};
  }
  if (op == "Identity") {
    if (input(0) == nullptr) Fail(node, "missing input");
    return {*input(0)};
  }
  if (op == "Dropout") {
    if (node.outputs.size() > 1 && !node.outputs[1].empty()) {
      Fail(node, "the mask output is not supported");
    }
    return {RequireFloat(node, input(0), 0)};
  }
  if (op == "Concat") return {Concat(node, in)};
  if (op == "Add" || op == "Sub" || op == "Mul" || op == "Div") {
    return {Binary(node, input(0), input(1))};
  }
  if (op == "Flatten") {
    if (input(0) == nullptr) Fail(node, "missing input");
    return {Flatten(node, *input(0))};
  }
  if (op == "Reshape") {
    if (input(0) == nullptr) Fail(node, "missing input");
    return {Reshape(node, *input(0), input(1))};
  }
  if (op == "Gemm") {
    return {Gemm(node, RequireFloat(node, input(0), 0), RequireFloat(node, input(1), 1),
                 input(2))};
  }
  if (op == "BatchNormalization") {
    if (node.outputs.size() > 1) Fail(node, "training-mode outputs are not supported");
    return {BatchNorm(node, RequireFloat(node, input(0), 0), RequireFloat(node, input(1), 1),
                      RequireFloat(node, input(2), 2), RequireFloat(node, input(3), 3),
                      RequireFloat(node, input(4), 4))};
  }
  if (op == "ReduceMean") {
    return {ReduceMean(node, RequireFloat(node, input(0), 0), input(1))};
  }
  if (op == "Constant") return {ConstantValue(node)};
  Fail(node, "unsupported operator");
}

}  // namespace

OnnxGraph OnnxGraph::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelIoError("cannot open model file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  if (in.bad()) throw ModelIoError("failed reading model file " + path.string());
  try {
    return Parse(bytes);
  } catch (const ModelIoError& e) {
    throw ModelIoError(path.string() + ": " + e.what());
  }
}

OnnxGraph OnnxGraph::Parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() > static_cast<std::size_t>(INT_MAX)) {
    throw ModelIoError("model larger than 2 GiB");
  }
  pb::ModelProto model;
  {
    google::protobuf::io::ArrayInputStream raw(bytes.data(), static_cast<int>(bytes.size()));
    google::protobuf::io::CodedInputStream coded(&raw);
    coded.SetTotalBytesLimit(INT_MAX);
    if (!model.ParseFromCodedStream(&coded) || !coded.ConsumedEntireMessage()) {
      throw ModelIoError("not a valid ONNX model");
    }
  }
  if (!model.has_graph() || model.graph().node_size() == 0) {
    throw ModelIoError("model has no graph");
  }

  OnnxGraph g;
  for (const pb::OperatorSetIdProto& set : model.opset_import()) {
    if (set.domain().empty() || set.domain() == "ai.onnx") g.opset_ = set.version();
  }
  const pb::GraphProto& graph = model.graph();
  for (const pb::TensorProto& init : graph.initializer()) {
    g.initializers_.emplace(init.name(), ConvertTensor(init));
  }
  for (const pb::ValueInfoProto& v : graph.input()) {
    if (!g.initializers_.contains(v.name())) g.inputs_.push_back(v.name());
  }
  for (const pb::ValueInfoProto& v : graph.output()) g.outputs_.push_back(v.name());
  g.nodes_.reserve(static_cast<std::size_t>(graph.node_size()));
  for (const pb::NodeProto& np : graph.node()) {
    Node node;
    node.name = np.name();
    node.op_type = np.op_type();
    if (!np.domain().empty() && np.domain() != "ai.onnx") {
      node.op_type = np.domain() + "." + np.op_type();
    }
    node.inputs.assign(np.input().begin(), np.input().end());
    node.outputs.assign(np.output().begin(), np.output().end());
    for (const pb::AttributeProto& a : np.attribute()) {
      node.attributes.emplace(a.name(), ConvertAttribute(a));
    }
    for (const std::string& out : node.outputs) {
      if (out.empty()) continue;
      if (!g.producer_.emplace(out, g.nodes_.size()).second) {
        throw ModelIoError("value '" + out + "' is produced twice");
      }
    }
    g.nodes_.push_back(std::move(node));
  }
  return g;
}

bool OnnxGraph::HasValue(const std::string& name) const {
  return producer_.contains(name) || initializers_.contains(name) ||
         std::find(inputs_.begin(), inputs_.end(), name) != inputs_.end();
}

std::vector<std::size_t> OnnxGraph::NeededNodes(const std::vector<std::string>& fetches) const {
  std::vector<bool> needed(nodes_.size(), false);
  std::vector<std::string> stack(fetches.begin(), fetches.end());
  std::unordered_set<std::string> seen;
  while (!stack.empty()) {
    const std::string name = std::move(stack.back());
    stack.pop_back();
    if (name.empty() || !seen.insert(name).second) continue;
    auto it = producer_.find(name);
    if (it == producer_.end()) {
      if (!HasValue(name)) throw ModelIoError("graph has no value named '" + name + "'");
      continue;
    }
    if (needed[it->second]) continue;
    needed[it->second] = true;
    for (const std::string& in : nodes_[it->second].inputs) stack.push_back(in);
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (needed[i]) order.push_back(i);
  }
  return order;
}

void OnnxGraph::CheckSupported(const std::vector<std::string>& fetches) const {
  for (std::size_t i : NeededNodes(fetches)) {
    if (!SupportedSet().contains(nodes_[i].op_type)) {
      throw ModelIoError("unsupported operator " + nodes_[i].op_type + " in node '" +
                         nodes_[i].name + "'");
    }
  }
}

std::unordered_map<std::string, Tensor> OnnxGraph::Run(
    const std::unordered_map<std::string, Tensor>& feeds,
    const std::vector<std::string>& fetches) const {
  const std::vector<std::size_t> order = NeededNodes(fetches);
  const std::unordered_set<std::string> wanted(fetches.begin(), fetches.end());

  // Remaining consumers per intermediate value, so buffers can be dropped.
  std::unordered_map<std::string, int> uses;
  for (std::size_t i : order) {
    for (const std::string& in : nodes_[i].inputs) {
      if (!in.empty()) ++uses[in];
    }
  }

  std::unordered_map<std::string, Tensor> values;
  auto lookup = [&](const std::string& name) -> const Tensor* {
    if (auto it = values.find(name); it != values.end()) return &it->second;
    if (auto it = feeds.find(name); it != feeds.end()) return &it->second;
    if (auto it = initializers_.find(name); it != initializers_.end()) return &it->second;
    return nullptr;
  };

  for (std::size_t i : order) {
    const Node& node = nodes_[i];
    std::vector<const Tensor*> inputs;
    inputs.reserve(node.inputs.size());
    for (const std::string& name : node.inputs) {
      if (name.empty()) {
        inputs.push_back(nullptr);
        continue;
      }
      const Tensor* t = lookup(name);
      if (t == nullptr) {
        throw ModelIoError("value '" + name + "' needed by node '" + node.name +
                           "' is not available (unfed input or unsorted graph)");
      }
      inputs.push_back(t);
    }
    std::vector<Tensor> outputs = Execute(node, inputs, opset_);
    for (const std::string& name : node.inputs) {
      if (name.empty()) continue;
      if (--uses[name] == 0 && !wanted.contains(name)) values.erase(name);
    }
    for (std::size_t k = 0; k < outputs.size() && k < node.outputs.size(); ++k) {
      if (!node.outputs[k].empty()) values[node.outputs[k]] = std::move(outputs[k]);
    }
  }

  std::unordered_map<std::string, Tensor> result;
  for (const std::string& name : fetches) {
    const Tensor* t = lookup(name);
    if (t == nullptr) throw ModelIoError("output '" + name + "' was not computed");
    result[name] = *t;
  }
  return result;
}

std::vector<std::string> SupportedOnnxOperators() {
  return {SupportedSet().begin(), SupportedSet().end()};
}

}  // namespace cfid
