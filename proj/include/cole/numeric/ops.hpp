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

// Differentiable operations over row-major matrices. Every tensor is viewed
// as rows x cols where cols is the last extent.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <utility>

#include "cole/numeric/tensor.hpp"

namespace cole::numeric {

/// Floor used wherever a probability enters a logarithm.
inline constexpr double kLogEpsilon = 1e-9;

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMatrix<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMatrix<T>>;

template <typename T>
ConstMap<T> as_matrix(const std::vector<T>& v, std::size_t rows, std::size_t cols) {
  return ConstMap<T>(v.data(), static_cast<Eigen::Index>(rows),
                     static_cast<Eigen::Index>(cols));
}
template <typename T>
MutMap<T> as_matrix(std::vector<T>& v, std::size_t rows, std::size_t cols) {
  return MutMap<T>(v.data(), static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(cols));
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw NumericError(message);
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
}

}  // namespace detail

/// Leaf copy of `x` that no gradient flows back through.
template <typename T>
Tensor<T> detach(const Tensor<T>& x) {
  return Tensor<T>::from_values(x.shape(), std::vector<T>(x.values().begin(), x.values().end()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  detail::require(element_count(shape) == x.size(),
                  "reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  auto* xn = x.node();
  return make_result<T>(std::move(shape), std::vector<T>(xn->value), {&x},
                        [xn](Node<T>& out) {
                          for (std::size_t i = 0; i < out.grad.size(); ++i) xn->grad[i] += out.grad[i];
                        },
                        "reshape");
}

// a[m,k] * b[k,n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  detail::require(b.rows() == k, "matmul: inner dimensions differ " + shape_string(a.shape()) +
                                     " x " + shape_string(b.shape()));
  auto* an = a.node();
  auto* bn = b.node();
  std::vector<T> out(m * n);
  detail::as_matrix(out, m, n).noalias() =
      detail::as_matrix(an->value, m, k) * detail::as_matrix(bn->value, k, n);
  return make_result<T>(
      {m, n}, std::move(out), {&a, &b},
      [an, bn, m, k, n](Node<T>& o) {
        auto dout = detail::as_matrix(std::as_const(o.grad), m, n);
        if (an->requires_grad) {
          detail::as_matrix(an->grad, m, k).noalias() +=
              dout * detail::as_matrix(std::as_const(bn->value), k, n).transpose();
        }
        if (bn->requires_grad) {
          detail::as_matrix(bn->grad, k, n).noalias() +=
              detail::as_matrix(std::as_const(an->value), m, k).transpose() * dout;
        }
      },
      "matmul");
}

// a[m,k] * b[n,k]^T
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  detail::require(b.cols() == k, "matmul_nt: inner dimensions differ " +
                                     shape_string(a.shape()) + " x " +
                                     shape_string(b.shape()) + "^T");
  auto* an = a.node();
  auto* bn = b.node();
  std::vector<T> out(m * n);
  detail::as_matrix(out, m, n).noalias() =
      detail::as_matrix(an->value, m, k) * detail::as_matrix(bn->value, n, k).transpose();
  return make_result<T>(
      {m, n}, std::move(out), {&a, &b},
      [an, bn, m, k, n](Node<T>& o) {
        auto dout = detail::as_matrix(std::as_const(o.grad), m, n);
        if (an->requires_grad) {
          detail::as_matrix(an->grad, m, k).noalias() +=
              dout * detail::as_matrix(std::as_const(bn->value), n, k);
        }
        if (bn->requires_grad) {
          detail::as_matrix(bn->grad, n, k).noalias() +=
              dout.transpose() * detail::as_matrix(std::as_const(an->value), m, k);
        }
      },
      "matmul_nt");
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  auto* an = a.node();
  auto* bn = b.node();
  std::vector<T> out(an->value);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bn->value[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b},
                        [an, bn](Node<T>& o) {
                          if (an->requires_grad)
                            for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
                          if (bn->requires_grad)
                            for (std::size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] += o.grad[i];
                        },
                        "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  auto* an = a.node();
  auto* bn = b.node();
  std::vector<T> out(an->value);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bn->value[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b},
                        [an, bn](Node<T>& o) {
                          if (an->requires_grad)
                            for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
                          if (bn->requires_grad)
                            for (std::size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] -= o.grad[i];
                        },
                        "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  auto* an = a.node();
  auto* bn = b.node();
  std::vector<T> out(an->value);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bn->value[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b},
                        [an, bn](Node<T>& o) {
                          if (an->requires_grad)
                            for (std::size_t i = 0; i < o.grad.size(); ++i)
                              an->grad[i] += o.grad[i] * bn->value[i];
                          if (bn->requires_grad)
                            for (std::size_t i = 0; i < o.grad.size(); ++i)
                              bn->grad[i] += o.grad[i] * an->value[i];
                        },
                        "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  auto* an = a.node();
  std::vector<T> out(an->value);
  for (T& v : out) v *= factor;
  return make_result<T>(a.shape(), std::move(out), {&a},
                        [an, factor](Node<T>& o) {
                          for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] * factor;
                        },
                        "scale");
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  auto* an = a.node();
  std::vector<T> out(an->value);
  for (T& v : out) v += offset;
  return make_result<T>(a.shape(), std::move(out), {&a},
                        [an](Node<T>& o) {
                          for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
                        },
                        "add_scalar");
}

/// x[m,n] + bias[n] broadcast over rows.
template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& bias) {
  const std::size_t m = x.rows(), n = x.cols();
  detail::require(bias.size() == n, "add_row: bias of size " + std::to_string(bias.size()) +
                                        " for " + std::to_string(n) + " columns");
  auto* xn = x.node();
  auto* bn = bias.node();
  std::vector<T> out(xn->value);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bn->value[c];
  return make_result<T>(x.shape(), std::move(out), {&x, &bias},
                        [xn, bn, m, n](Node<T>& o) {
                          if (xn->requires_grad)
                            for (std::size_t i = 0; i < o.grad.size(); ++i) xn->grad[i] += o.grad[i];
                          if (bn->requires_grad)
                            for (std::size_t r = 0; r < m; ++r)
                              for (std::size_t c = 0; c < n; ++c) bn->grad[c] += o.grad[r * n + c];
                        },
                        "add_row");
}

/// Multiplies row r of x by the constant coeffs[r].
template <typename T>
Tensor<T> scale_rows(const Tensor<T>& x, std::vector<T> coeffs) {
  const std::size_t m = x.rows(), n = x.cols();
  detail::require(coeffs.size() == m, "scale_rows: coefficient count != rows");
  auto* xn = x.node();
  std::vector<T> out(xn->value);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] *= coeffs[r];
  return make_result<T>(x.shape(), std::move(out), {&x},
                        [xn, m, n, coeffs = std::move(coeffs)](Node<T>& o) {
                          for (std::size_t r = 0; r < m; ++r)
                            for (std::size_t c = 0; c < n; ++c)
                              xn->grad[r * n + c] += o.grad[r * n + c] * coeffs[r];
                        },
                        "scale_rows");
}

/// Exact (erf) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  auto* xn = x.node();
  std::vector<T> out(xn->value.size());
  const T inv_sqrt2 = T(1) / std::sqrt(T(2));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = xn->value[i];
    out[i] = T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2));
  }
  return make_result<T>(
      x.shape(), std::move(out), {&x},
      [xn, inv_sqrt2](Node<T>& o) {
        const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
          const T v = xn->value[i];
          const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
          const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
          xn->grad[i] += o.grad[i] * (cdf + v * pdf);
        }
      },
      "gelu");
}

/// Row-wise layer normalization with learned gain and bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-12)) {
  const std::size_t m = x.rows(), n = x.cols();
  detail::require(gain.size() == n && bias.size() == n, "layer_norm: parameter size mismatch");
  auto* xn = x.node();
  auto* gn = gain.node();
  auto* bn = bias.node();
  std::vector<T> out(m * n), xhat(m * n), inv_std(m);
  for (std::size_t r = 0; r < m; ++r) {
    const T* row = xn->value.data() + r * n;
    T mean = 0;
    for (std::size_t c = 0; c < n; ++c) mean += row[c];
    mean /= T(n);
    T var = 0;
    for (std::size_t c = 0; c < n; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= T(n);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat[r * n + c] = (row[c] - mean) * inv_std[r];
      out[r * n + c] = xhat[r * n + c] * gn->value[c] + bn->value[c];
    }
  }
  return make_result<T>(
      x.shape(), std::move(out), {&x, &gain, &bias},
      [xn, gn, bn, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& o) {
        std::vector<T> dxhat(n);
        for (std::size_t r = 0; r < m; ++r) {
          const T* dy = o.grad.data() + r * n;
          const T* xh = xhat.data() + r * n;
          T sum_d = 0, sum_dx = 0;
          for (std::size_t c = 0; c < n; ++c) {
            dxhat[c] = dy[c] * gn->value[c];
            sum_d += dxhat[c];
            sum_dx += dxhat[c] * xh[c];
            if (gn->requires_grad) gn->grad[c] += dy[c] * xh[c];
            if (bn->requires_grad) bn->grad[c] += dy[c];
          }
          if (xn->requires_grad) {
            const T k = inv_std[r] / T(n);
            for (std::size_t c = 0; c < n; ++c)
              xn->grad[r * n + c] += k * (T(n) * dxhat[c] - sum_d - xh[c] * sum_dx);
          }
        }
      },
      "layer_norm");
}

namespace detail {
template <typename T>
void softmax_inplace(T* row, std::size_t n) {
  T mx = -std::numeric_limits<T>::infinity();
  for (std::size_t c = 0; c < n; ++c) {
    if (std::isnan(row[c])) throw DivergenceError("softmax: NaN input");
    mx = std::max(mx, row[c]);
  }
  T sum = 0;
  for (std::size_t c = 0; c < n; ++c) {
    row[c] = std::exp(row[c] - mx);
    sum += row[c];
  }
  for (std::size_t c = 0; c < n; ++c) row[c] /= sum;
}
}  // namespace detail

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  const std::size_t m = x.rows(), n = x.cols();
  auto* xn = x.node();
  std::vector<T> out(xn->value);
  for (std::size_t r = 0; r < m; ++r) detail::softmax_inplace(out.data() + r * n, n);
  auto result = make_result<T>(x.shape(), std::move(out), {&x}, nullptr, "softmax");
  if (result.requires_grad()) {
    result.node()->backward_fn = [xn, m, n](Node<T>& o) {
      for (std::size_t r = 0; r < m; ++r) {
        const T* y = o.value.data() + r * n;
        const T* dy = o.grad.data() + r * n;
        T dot = 0;
        for (std::size_t c = 0; c < n; ++c) dot += dy[c] * y[c];
        for (std::size_t c = 0; c < n; ++c) xn->grad[r * n + c] += y[c] * (dy[c] - dot);
      }
    };
  }
  return result;
}

/// A contiguous block of rows forming one sequence.
struct Segment {
  std::size_t start = 0;
  std::size_t length = 0;
};

/// Scaled dot-product multi-head self-attention. Rows of q, k, v are packed
/// sequences; every position attends to all positions of its own segment.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    std::vector<Segment> segments, std::size_t heads) {
  const std::size_t n = q.rows(), d = q.cols();
  detail::require(k.shape() == q.shape() && v.shape() == q.shape(), "attention: q/k/v shapes differ");
  detail::require(heads > 0 && d % heads == 0, "attention: model dimension not divisible by heads");
  const std::size_t dh = d / heads;
  const T scale_factor = T(1) / std::sqrt(T(dh));
  auto* qn = q.node();
  auto* kn = k.node();
  auto* vn = v.node();

  std::size_t prob_count = 0;
  for (const Segment& s : segments) {
    detail::require(s.start + s.length <= n, "attention: segment out of range");
    prob_count += heads * s.length * s.length;
  }
  std::vector<T> probs(prob_count);
  std::vector<T> out(n * d, T(0));
  std::size_t offset = 0;
  for (const Segment& s : segments) {
    const std::size_t len = s.length;
    for (std::size_t h = 0; h < heads; ++h) {
      T* p = probs.data() + offset;
      for (std::size_t i = 0; i < len; ++i) {
        const T* qi = qn->value.data() + (s.start + i) * d + h * dh;
        for (std::size_t j = 0; j < len; ++j) {
          const T* kj = kn->value.data() + (s.start + j) * d + h * dh;
          T dot = 0;
          for (std::size_t c = 0; c < dh; ++c) dot += qi[c] * kj[c];
          p[i * len + j] = dot * scale_factor;
        }
        detail::softmax_inplace(p + i * len, len);
        T* oi = out.data() + (s.start + i) * d + h * dh;
        for (std::size_t j = 0; j < len; ++j) {
          const T* vj = vn->value.data() + (s.start + j) * d + h * dh;
          const T a = p[i * len + j];
          for (std::size_t c = 0; c < dh; ++c) oi[c] += a * vj[c];
        }
      }
      offset += len * len;
    }
  }

  return make_result<T>(
      q.shape(), std::move(out), {&q, &k, &v},
      [qn, kn, vn, d, dh, heads, scale_factor, segments = std::move(segments),
       probs = std::move(probs)](Node<T>& o) {
        std::size_t offset = 0;
        std::vector<T> dp;
        for (const Segment& s : segments) {
          const std::size_t len = s.length;
          dp.assign(len * len, T(0));
          for (std::size_t h = 0; h < heads; ++h) {
            const T* p = probs.data() + offset;
            for (std::size_t i = 0; i < len; ++i) {
              const T* doi = o.grad.data() + (s.start + i) * d + h * dh;
              for (std::size_t j = 0; j < len; ++j) {
                const T* vj = vn->value.data() + (s.start + j) * d + h * dh;
                T dot = 0;
                for (std::size_t c = 0; c < dh; ++c) dot += doi[c] * vj[c];
                dp[i * len + j] = dot;
                if (vn->requires_grad) {
                  T* dvj = vn->grad.data() + (s.start + j) * d + h * dh;
                  const T a = p[i * len + j];
                  for (std::size_t c = 0; c < dh; ++c) dvj[c] += a * doi[c];
                }
              }
              // softmax backward for row i, then through the scaled scores
              T row_dot = 0;
              for (std::size_t j = 0; j < len; ++j) row_dot += dp[i * len + j] * p[i * len + j];
              for (std::size_t j = 0; j < len; ++j) {
                const T ds = p[i * len + j] * (dp[i * len + j] - row_dot) * scale_factor;
                if (ds == T(0)) continue;
                if (qn->requires_grad) {
                  T* dqi = qn->grad.data() + (s.start + i) * d + h * dh;
                  const T* kj = kn->value.data() + (s.start + j) * d + h * dh;
                  for (std::size_t c = 0; c < dh; ++c) dqi[c] += ds * kj[c];
                }
                if (kn->requires_grad) {
                  T* dkj = kn->grad.data() + (s.start + j) * d + h * dh;
                  const T* qi = qn->value.data() + (s.start + i) * d + h * dh;
                  for (std::size_t c = 0; c < dh; ++c) dkj[c] += ds * qi[c];
                }
              }
            }
            offset += len * len;
          }
        }
      },
      "attention");
}

/// out[i] = table[indices[i]]
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::vector<std::size_t> indices) {
  const std::size_t m = table.rows(), n = table.cols();
  auto* tn = table.node();
  std::vector<T> out(indices.size() * n);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    detail::require(indices[i] < m, "gather_rows: index " + std::to_string(indices[i]) +
                                        " out of range " + std::to_string(m));
    std::copy_n(tn->value.data() + indices[i] * n, n, out.data() + i * n);
  }
  const std::size_t count = indices.size();
  return make_result<T>({count, n}, std::move(out), {&table},
                        [tn, n, indices = std::move(indices)](Node<T>& o) {
                          for (std::size_t i = 0; i < indices.size(); ++i) {
                            T* dst = tn->grad.data() + indices[i] * n;
                            const T* src = o.grad.data() + i * n;
                            for (std::size_t c = 0; c < n; ++c) dst[c] += src[c];
                          }
                        },
                        "gather_rows");
}

/// out has `rows` rows; out[indices[i]] += src[i]. Rows never targeted stay zero.
template <typename T>
Tensor<T> scatter_add_rows(const Tensor<T>& src, std::vector<std::size_t> indices,
                           std::size_t rows) {
  const std::size_t n = src.cols();
  detail::require(indices.size() == src.rows(), "scatter_add_rows: index count != source rows");
  auto* sn = src.node();
  std::vector<T> out(rows * n, T(0));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    detail::require(indices[i] < rows, "scatter_add_rows: index out of range");
    T* dst = out.data() + indices[i] * n;
    const T* s = sn->value.data() + i * n;
    for (std::size_t c = 0; c < n; ++c) dst[c] += s[c];
  }
  return make_result<T>({rows, n}, std::move(out), {&src},
                        [sn, n, indices = std::move(indices)](Node<T>& o) {
                          for (std::size_t i = 0; i < indices.size(); ++i) {
                            const T* g = o.grad.data() + indices[i] * n;
                            T* dst = sn->grad.data() + i * n;
                            for (std::size_t c = 0; c < n; ++c) dst[c] += g[c];
                          }
                        },
                        "scatter_add_rows");
}

/// out.flat[i] = x.flat[flat_indices[i]], reshaped to `shape`.
template <typename T>
Tensor<T> gather_elements(const Tensor<T>& x, std::vector<std::size_t> flat_indices, Shape shape) {
  detail::require(element_count(shape) == flat_indices.size(), "gather_elements: shape/index mismatch");
  auto* xn = x.node();
  std::vector<T> out(flat_indices.size());
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    detail::require(flat_indices[i] < xn->value.size(), "gather_elements: index out of range");
    out[i] = xn->value[flat_indices[i]];
  }
  return make_result<T>(std::move(shape), std::move(out), {&x},
                        [xn, idx = std::move(flat_indices)](Node<T>& o) {
                          for (std::size_t i = 0; i < idx.size(); ++i) xn->grad[idx[i]] += o.grad[i];
                        },
                        "gather_elements");
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  auto* xn = x.node();
  T total = 0;
  for (T v : xn->value) total += v;
  return make_result<T>({1}, {total}, {&x},
                        [xn](Node<T>& o) {
                          for (T& g : xn->grad) g += o.grad[0];
                        },
                        "sum_all");
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  return scale(sum_all(x), T(1) / T(x.size()));
}

/// Per-row sums, shape [rows, 1].
template <typename T>
Tensor<T> sum_rows(const Tensor<T>& x) {
  const std::size_t m = x.rows(), n = x.cols();
  auto* xn = x.node();
  std::vector<T> out(m, T(0));
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r] += xn->value[r * n + c];
  return make_result<T>({m, 1}, std::move(out), {&x},
                        [xn, m, n](Node<T>& o) {
                          for (std::size_t r = 0; r < m; ++r)
                            for (std::size_t c = 0; c < n; ++c) xn->grad[r * n + c] += o.grad[r];
                        },
                        "sum_rows");
}

/// log(max(x, eps)); the clamped region has zero gradient.
template <typename T>
Tensor<T> log_clamped(const Tensor<T>& x, T eps = T(kLogEpsilon)) {
  auto* xn = x.node();
  std::vector<T> out(xn->value.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(xn->value[i], eps));
  return make_result<T>(x.shape(), std::move(out), {&x},
                        [xn, eps](Node<T>& o) {
                          for (std::size_t i = 0; i < o.grad.size(); ++i) {
                            const T v = xn->value[i];
                            if (v > eps) xn->grad[i] += o.grad[i] / v;
                          }
                        },
                        "log_clamped");
}

/// Divides each row by its sum. A row summing to (numerically) zero maps to
/// zeros instead of NaN.
template <typename T>
Tensor<T> normalize_rows(const Tensor<T>& x) {
  const std::size_t m = x.rows(), n = x.cols();
  auto* xn = x.node();
  std::vector<T> out(xn->value), sums(m, T(0));
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) sums[r] += out[r * n + c];
    sums[r] = std::max(sums[r], std::numeric_limits<T>::min());
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] /= sums[r];
  }
  auto result = make_result<T>(x.shape(), std::move(out), {&x}, nullptr, "normalize_rows");
  if (result.requires_grad()) {
    result.node()->backward_fn = [xn, m, n, sums = std::move(sums)](Node<T>& o) {
      for (std::size_t r = 0; r < m; ++r) {
        T dot = 0;
        for (std::size_t c = 0; c < n; ++c) dot += o.grad[r * n + c] * o.value[r * n + c];
        for (std::size_t c = 0; c < n; ++c)
          xn->grad[r * n + c] += (o.grad[r * n + c] - dot) / sums[r];
      }
    };
  }
  return result;
}

/// Inverted dropout; identity when `rate` is zero.
template <typename T, typename Rng>
Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  detail::require(rate < 1.0, "dropout: rate must be < 1");
  auto* xn = x.node();
  std::bernoulli_distribution keep(1.0 - rate);
  const T factor = T(1.0 / (1.0 - rate));
  std::vector<T> mask(xn->value.size());
  for (T& m : mask) m = keep(rng) ? factor : T(0);
  std::vector<T> out(xn->value);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_result<T>(x.shape(), std::move(out), {&x},
                        [xn, mask = std::move(mask)](Node<T>& o) {
                          for (std::size_t i = 0; i < o.grad.size(); ++i) xn->grad[i] += o.grad[i] * mask[i];
                        },
                        "dropout");
}

}  // namespace cole::numeric
