// Copyright 2026 The cole Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Post-norm Transformer encoder (bidirectional attention, GELU feed-forward).

#pragma once

#include <random>
#include <string>
#include <vector>

#include "cole/numeric/ops.hpp"
#include "cole/numeric/params.hpp"

namespace cole::numeric {

struct EncoderShape {
  std::size_t dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ffn_dim = 0;  // 0 selects 4 * dim

  std::size_t feed_forward() const { return ffn_dim ? ffn_dim : 4 * dim; }
};

template <typename T>
struct EncoderLayerParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor<T> ln1_gain, ln1_bias;
  Tensor<T> w1, b1, w2, b2;
  Tensor<T> ln2_gain, ln2_bias;
};

template <typename T>
struct EncoderParams {
  EncoderShape shape;
  std::vector<EncoderLayerParams<T>> layers;

  template <typename Rng>
  static EncoderParams create(const EncoderShape& shape, ParameterSet<T>& set, const std::string& prefix,
                              Rng& rng) {
    if (shape.heads == 0 || shape.dim % shape.heads != 0) {
      throw NumericError("encoder: dimension " + std::to_string(shape.dim) +
                         " not divisible by head count " + std::to_string(shape.heads));
    }
    EncoderParams p;
    p.shape = shape;
    const std::size_t d = shape.dim, f = shape.feed_forward();
    for (std::size_t l = 0; l < shape.layers; ++l) {
      const std::string n = prefix + ".layer" + std::to_string(l) + ".";
      EncoderLayerParams<T> lp;
      lp.wq = set.add(n + "attn.wq", {d, d}, Init::kTruncatedNormal, rng);
      lp.bq = set.add(n + "attn.bq", {d}, Init::kZeros, rng);
      lp.wk = set.add(n + "attn.wk", {d, d}, Init::kTruncatedNormal, rng);
      lp.bk = set.add(n + "attn.bk", {d}, Init::kZeros, rng);
      lp.wv = set.add(n + "attn.wv", {d, d}, Init::kTruncatedNormal, rng);
      lp.bv = set.add(n + "attn.bv", {d}, Init::kZeros, rng);
      lp.wo = set.add(n + "attn.wo", {d, d}, Init::kTruncatedNormal, rng);
      lp.bo = set.add(n + "attn.bo", {d}, Init::kZeros, rng);
      lp.ln1_gain = set.add(n + "ln1.gain", {d}, Init::kOnes, rng);
      lp.ln1_bias = set.add(n + "ln1.bias", {d}, Init::kZeros, rng);
      lp.w1 = set.add(n + "ffn.w1", {d, f}, Init::kTruncatedNormal, rng);
      lp.b1 = set.add(n + "ffn.b1", {f}, Init::kZeros, rng);
      lp.w2 = set.add(n + "ffn.w2", {f, d}, Init::kTruncatedNormal, rng);
      lp.b2 = set.add(n + "ffn.b2", {d}, Init::kZeros, rng);
      lp.ln2_gain = set.add(n + "ln2.gain", {d}, Init::kOnes, rng);
      lp.ln2_bias = set.add(n + "ln2.bias", {d}, Init::kZeros, rng);
      p.layers.push_back(std::move(lp));
    }
    return p;
  }
};

/// Dropout settings for one forward pass; a null rng means inference.
struct PassMode {
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  bool training() const { return rng != nullptr && dropout > 0.0; }
};

template <typename T>
Tensor<T> maybe_dropout(const Tensor<T>& x, const PassMode& mode) {
  if (!mode.training()) return x;
  return dropout(x, mode.dropout, *mode.rng);
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return add_row(matmul(x, w), b);
}

/// Encodes packed sequences: `inputs` holds one row per position (position
/// embeddings already added) and `segments` delimits the sequences.
template <typename T>
Tensor<T> encode_sequences(const Tensor<T>& inputs, const std::vector<Segment>& segments,
                           const EncoderParams<T>& params, const PassMode& mode = {}) {
  if (inputs.cols() != params.shape.dim) {
    throw NumericError("encode: input width " + std::to_string(inputs.cols()) +
                       " != model dimension " + std::to_string(params.shape.dim));
  }
  Tensor<T> x = inputs;
  for (const auto& lp : params.layers) {
    Tensor<T> q = linear(x, lp.wq, lp.bq);
    Tensor<T> k = linear(x, lp.wk, lp.bk);
    Tensor<T> v = linear(x, lp.wv, lp.bv);
    Tensor<T> attended = linear(attention(q, k, v, segments, params.shape.heads), lp.wo, lp.bo);
    x = layer_norm(add(x, maybe_dropout(attended, mode)), lp.ln1_gain, lp.ln1_bias);
    Tensor<T> ff = linear(gelu(linear(x, lp.w1, lp.b1)), lp.w2, lp.b2);
    x = layer_norm(add(x, maybe_dropout(ff, mode)), lp.ln2_gain, lp.ln2_bias);
  }
  return x;
}

/// Single-sequence convenience form.
template <typename T>
Tensor<T> encode_sequence(const Tensor<T>& inputs, const EncoderParams<T>& params,
                          const PassMode& mode = {}) {
  if (inputs.rows() == 0) throw NumericError("encode: empty sequence");
  return encode_sequences(inputs, {Segment{0, inputs.rows()}}, params, mode);
}

/// Segments for `count` consecutive sequences of equal length.
inline std::vector<Segment> uniform_segments(std::size_t count, std::size_t length) {
  std::vector<Segment> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = {i * length, length};
  return out;
}

}  // namespace cole::numeric
