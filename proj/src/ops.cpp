#include "rmae/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rmae::inline RMAE_ABI {

namespace {

int normalize_axis(int axis, int rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(rank));
  }
  return axis;
}

std::size_t prod(const Shape& s, std::size_t begin, std::size_t end) {
  std::size_t p = 1;
  for (std::size_t i = begin; i < end; ++i) p *= static_cast<std::size_t>(s[i]);
  return p;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Result shape of a binary elementwise op under leading-axis expansion.
Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return a;
  if (is_suffix(b, a)) return a;
  if (is_suffix(a, b)) return b;
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                   shape_str(b) + " are not broadcast-compatible");
}

template <class Fwd, class GradA, class GradB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, Fwd fwd,
              GradA ga, GradB gb) {
  Shape out_shape = broadcast_shape(a.shape(), b.shape(), op);
  const std::size_t n = shape_numel(out_shape);
  const std::size_t na = a.numel(), nb = b.numel();
  std::vector<Scalar> out(n);
  const Scalar* pa = a.data().data();
  const Scalar* pb = b.data().data();
  if (na == n && nb == n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(pa[i], pb[i]);
  } else {
    const std::size_t small = std::min(na, nb);
    for (std::size_t base = 0; base < n; base += small)
      for (std::size_t j = 0; j < small; ++j) {
        const std::size_t i = base + j;
        out[i] = na == n ? fwd(pa[i], pb[j]) : fwd(pa[j], pb[i]);
      }
  }
  return make_result(std::move(out_shape), std::move(out), {a, b},
                     [na, nb, ga, gb](Node& self) {
                       Node& A = *self.inputs[0];
                       Node& B = *self.inputs[1];
                       const std::size_t n = self.value.size();
                       const Scalar* g = self.grad.data();
                       if (A.requires_grad) {
                         Scalar* da = A.grad.data();
                         for (std::size_t base = 0; base < n; base += std::min(na, nb))
                           for (std::size_t j = 0; j < std::min(na, nb); ++j) {
                             const std::size_t i = base + j;
                             const std::size_t ia = na == n ? i : j, ib = nb == n ? i : j;
                             da[ia] += ga(g[i], A.value[ia], B.value[ib]);
                           }
                       }
                       if (B.requires_grad) {
                         Scalar* db = B.grad.data();
                         for (std::size_t base = 0; base < n; base += std::min(na, nb))
                           for (std::size_t j = 0; j < std::min(na, nb); ++j) {
                             const std::size_t i = base + j;
                             const std::size_t ia = na == n ? i : j, ib = nb == n ? i : j;
                             db[ib] += gb(g[i], A.value[ia], B.value[ib]);
                           }
                       }
                     });
}

}  // namespace

void gemm(bool trans_a, bool trans_b, int m, int n, int k, const Scalar* a,
          const Scalar* b, Scalar* c, bool accumulate) {
  const std::size_t M = m, N = n, K = k;
  if (!accumulate) std::fill(c, c + M * N, Scalar(0));
  if (M == 0 || N == 0 || K == 0) return;
  // Transposed operands are copied to row-major so one saxpy kernel serves every case.
  std::vector<Scalar> bt;
  if (trans_b) {
    bt.resize(K * N);
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t p = 0; p < K; ++p) bt[p * N + j] = b[j * K + p];
    b = bt.data();
  }
  std::vector<Scalar> at;
  if (trans_a) {
    at.resize(M * K);
    for (std::size_t p = 0; p < K; ++p)
      for (std::size_t i = 0; i < M; ++i) at[i * K + p] = a[p * M + i];
    a = at.data();
  }
  for (std::size_t i = 0; i < M; ++i) {
    Scalar* __restrict crow = c + i * N;
    const Scalar* arow = a + i * K;
    std::size_t p = 0;
    for (; p + 4 <= K; p += 4) {
      const Scalar a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
      const Scalar* __restrict b0 = b + p * N;
      const Scalar* __restrict b1 = b0 + N;
      const Scalar* __restrict b2 = b1 + N;
      const Scalar* __restrict b3 = b2 + N;
      for (std::size_t j = 0; j < N; ++j) {
        crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
      }
    }
    for (; p < K; ++p) {
      const Scalar av = arow[p];
      const Scalar* __restrict brow = b + p * N;
      for (std::size_t j = 0; j < N; ++j) crow[j] += av * brow[j];
    }
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](Scalar x, Scalar y) { return x + y; },
      [](Scalar g, Scalar, Scalar) { return g; },
      [](Scalar g, Scalar, Scalar) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](Scalar x, Scalar y) { return x - y; },
      [](Scalar g, Scalar, Scalar) { return g; },
      [](Scalar g, Scalar, Scalar) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](Scalar x, Scalar y) { return x * y; },
      [](Scalar g, Scalar, Scalar y) { return g * y; },
      [](Scalar g, Scalar x, Scalar) { return g * x; });
}

Tensor scale(const Tensor& a, Scalar s) {
  std::vector<Scalar> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  return make_result(a.shape(), std::move(out), {a}, [s](Node& self) {
    Node& A = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += s * self.grad[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || b.rank() < 2) {
    throw ShapeError("matmul: shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " need rank >= 1 and >= 2");
  }
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (b.rank() == 2) {
    const int K = sa.back();
    if (K != sb[0]) {
      throw ShapeError("matmul: inner dimensions differ for " + shape_str(sa) +
                       " and " + shape_str(sb));
    }
    const int N = sb[1];
    const int rows = static_cast<int>(a.numel() / static_cast<std::size_t>(K));
    Shape out_shape = sa;
    out_shape.back() = N;
    std::vector<Scalar> out(static_cast<std::size_t>(rows) * N);
    gemm(false, false, rows, N, K, a.data().data(), b.data().data(), out.data(),
         false);
    return make_result(std::move(out_shape), std::move(out), {a, b},
                       [rows, N, K](Node& self) {
                         Node& A = *self.inputs[0];
                         Node& B = *self.inputs[1];
                         if (A.requires_grad) {
                           gemm(false, true, rows, K, N, self.grad.data(),
                                B.value.data(), A.grad.data(), true);
                         }
                         if (B.requires_grad) {
                           gemm(true, false, K, N, rows, A.value.data(),
                                self.grad.data(), B.grad.data(), true);
                         }
                       });
  }
  if (a.rank() != b.rank() || !std::equal(sa.begin(), sa.end() - 2, sb.begin())) {
    throw ShapeError("matmul: batch dimensions differ for " + shape_str(sa) +
                     " and " + shape_str(sb));
  }
  const int M = sa[sa.size() - 2], K = sa.back();
  const int N = sb.back();
  if (K != sb[sb.size() - 2]) {
    throw ShapeError("matmul: inner dimensions differ for " + shape_str(sa) +
                     " and " + shape_str(sb));
  }
  const std::size_t batch = prod(sa, 0, sa.size() - 2);
  Shape out_shape = sa;
  out_shape.back() = N;
  std::vector<Scalar> out(batch * M * N);
  const std::size_t sa_step = static_cast<std::size_t>(M) * K;
  const std::size_t sb_step = static_cast<std::size_t>(K) * N;
  const std::size_t sc_step = static_cast<std::size_t>(M) * N;
  for (std::size_t i = 0; i < batch; ++i) {
    gemm(false, false, M, N, K, a.data().data() + i * sa_step,
         b.data().data() + i * sb_step, out.data() + i * sc_step, false);
  }
  return make_result(
      std::move(out_shape), std::move(out), {a, b},
      [batch, M, N, K, sa_step, sb_step, sc_step](Node& self) {
        Node& A = *self.inputs[0];
        Node& B = *self.inputs[1];
        for (std::size_t i = 0; i < batch; ++i) {
          const Scalar* g = self.grad.data() + i * sc_step;
          if (A.requires_grad) {
            gemm(false, true, M, K, N, g, B.value.data() + i * sb_step,
                 A.grad.data() + i * sa_step, true);
          }
          if (B.requires_grad) {
            gemm(true, false, K, N, M, A.value.data() + i * sa_step, g,
                 B.grad.data() + i * sb_step, true);
          }
        }
      });
}

Tensor gelu(const Tensor& x) {
  const Scalar inv_sqrt2 = Scalar(0.70710678118654752440);
  std::vector<Scalar> out(x.numel());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = Scalar(0.5) * xv[i] * (Scalar(1) + std::erf(xv[i] * inv_sqrt2));
  }
  return make_result(x.shape(), std::move(out), {x}, [inv_sqrt2](Node& self) {
    Node& X = *self.inputs[0];
    const Scalar inv_sqrt_2pi = Scalar(0.39894228040143267794);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const Scalar v = X.value[i];
      const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(v * inv_sqrt2));
      const Scalar pdf = inv_sqrt_2pi * std::exp(Scalar(-0.5) * v * v);
      X.grad[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor softmax(const Tensor& x) {
  const std::size_t d = static_cast<std::size_t>(x.shape().back());
  const std::size_t rows = x.numel() / d;
  std::vector<Scalar> out(x.numel());
  auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* in = xv.data() + r * d;
    Scalar* o = out.data() + r * d;
    const Scalar mx = *std::max_element(in, in + d);
    Scalar total = 0;
    for (std::size_t j = 0; j < d; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < d; ++j) o[j] /= total;
  }
  return make_result(x.shape(), std::move(out), {x}, [rows, d](Node& self) {
    Node& X = *self.inputs[0];
    for (std::size_t r = 0; r < rows; ++r) {
      const Scalar* y = self.value.data() + r * d;
      const Scalar* g = self.grad.data() + r * d;
      Scalar dot = 0;
      for (std::size_t j = 0; j < d; ++j) dot += g[j] * y[j];
      Scalar* dx = X.grad.data() + r * d;
      for (std::size_t j = 0; j < d; ++j) dx[j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 Scalar eps) {
  const std::size_t d = static_cast<std::size_t>(x.shape().back());
  if (gamma.numel() != d || beta.numel() != d) {
    throw ShapeError("layernorm: input " + shape_str(x.shape()) +
                     " with scale " + shape_str(gamma.shape()) + " and shift " +
                     shape_str(beta.shape()));
  }
  const std::size_t rows = x.numel() / d;
  std::vector<Scalar> out(x.numel());
  auto xhat = std::make_shared<std::vector<Scalar>>(x.numel());
  auto rstd = std::make_shared<std::vector<Scalar>>(rows);
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* in = xv.data() + r * d;
    Scalar mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= static_cast<Scalar>(d);
    Scalar var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<Scalar>(d);
    const Scalar rs = Scalar(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const Scalar h = (in[j] - mu) * rs;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [rows, d, xhat, rstd](Node& self) {
        Node& X = *self.inputs[0];
        Node& G = *self.inputs[1];
        Node& B = *self.inputs[2];
        std::vector<Scalar> dh(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const Scalar* g = self.grad.data() + r * d;
          const Scalar* h = xhat->data() + r * d;
          if (G.requires_grad) {
            for (std::size_t j = 0; j < d; ++j) G.grad[j] += g[j] * h[j];
          }
          if (B.requires_grad) {
            for (std::size_t j = 0; j < d; ++j) B.grad[j] += g[j];
          }
          if (X.requires_grad) {
            Scalar mean_dh = 0, mean_dh_h = 0;
            for (std::size_t j = 0; j < d; ++j) {
              dh[j] = g[j] * G.value[j];
              mean_dh += dh[j];
              mean_dh_h += dh[j] * h[j];
            }
            mean_dh /= static_cast<Scalar>(d);
            mean_dh_h /= static_cast<Scalar>(d);
            Scalar* dx = X.grad.data() + r * d;
            const Scalar rs = (*rstd)[r];
            for (std::size_t j = 0; j < d; ++j) {
              dx[j] += rs * (dh[j] - mean_dh - h[j] * mean_dh_h);
            }
          }
        }
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  }
  return make_result(std::move(shape), x.values(), {x}, [](Node& self) {
    Node& X = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) X.grad[i] += self.grad[i];
  });
}

Tensor transpose(const Tensor& x, int axis0, int axis1) {
  const int r = x.rank();
  int i = normalize_axis(axis0, r, "transpose");
  int j = normalize_axis(axis1, r, "transpose");
  if (i == j) return reshape(x, x.shape());
  if (i > j) std::swap(i, j);
  const Shape& s = x.shape();
  const std::size_t A = prod(s, 0, i), Di = s[i], M = prod(s, i + 1, j), Dj = s[j],
                    I = prod(s, j + 1, s.size());
  Shape out_shape = s;
  std::swap(out_shape[i], out_shape[j]);
  // in[a, x, m, y, t] -> out[a, y, m, x, t]
  auto index_pair = [=](auto&& fn) {
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t xi = 0; xi < Di; ++xi)
        for (std::size_t m = 0; m < M; ++m)
          for (std::size_t y = 0; y < Dj; ++y) {
            const std::size_t in = (((a * Di + xi) * M + m) * Dj + y) * I;
            const std::size_t out = (((a * Dj + y) * M + m) * Di + xi) * I;
            fn(in, out);
          }
  };
  std::vector<Scalar> out(x.numel());
  auto xv = x.data();
  index_pair([&](std::size_t in, std::size_t o) {
    for (std::size_t t = 0; t < I; ++t) out[o + t] = xv[in + t];
  });
  return make_result(std::move(out_shape), std::move(out), {x},
                     [index_pair, I](Node& self) {
                       Node& X = *self.inputs[0];
                       index_pair([&](std::size_t in, std::size_t o) {
                         for (std::size_t t = 0; t < I; ++t)
                           X.grad[in + t] += self.grad[o + t];
                       });
                     });
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = xs[0].shape();
  const int ax = normalize_axis(axis, static_cast<int>(s0.size()), "concat");
  std::vector<std::size_t> chunk(xs.size());
  Shape out_shape = s0;
  out_shape[ax] = 0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const Shape& s = xs[t].shape();
    bool ok = s.size() == s0.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) {
      if (static_cast<int>(d) != ax && s[d] != s0[d]) ok = false;
    }
    if (!ok) {
      throw ShapeError("concat: shapes " + shape_str(s0) + " and " + shape_str(s) +
                       " differ off axis " + std::to_string(ax));
    }
    out_shape[ax] += s[ax];
  }
  const std::size_t outer = prod(s0, 0, ax);
  const std::size_t inner = prod(s0, ax + 1, s0.size());
  for (std::size_t t = 0; t < xs.size(); ++t) chunk[t] = xs[t].shape()[ax] * inner;
  const std::size_t row = static_cast<std::size_t>(out_shape[ax]) * inner;
  std::vector<Scalar> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    auto v = xs[t].data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.data() + o * chunk[t], chunk[t], out.data() + o * row + offset);
    }
    offset += chunk[t];
  }
  return make_result(std::move(out_shape), std::move(out), xs,
                     [chunk, outer, row](Node& self) {
                       std::size_t offset = 0;
                       for (std::size_t t = 0; t < self.inputs.size(); ++t) {
                         Node& X = *self.inputs[t];
                         if (X.requires_grad) {
                           for (std::size_t o = 0; o < outer; ++o) {
                             const Scalar* g = self.grad.data() + o * row + offset;
                             Scalar* dx = X.grad.data() + o * chunk[t];
                             for (std::size_t q = 0; q < chunk[t]; ++q) dx[q] += g[q];
                           }
                         }
                         offset += chunk[t];
                       }
                     });
}

Tensor slice(const Tensor& x, int axis, int begin, int end) {
  const Shape& s = x.shape();
  const int ax = normalize_axis(axis, x.rank(), "slice");
  if (begin < 0 || end > s[ax] || begin >= end) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") invalid for axis " +
                     std::to_string(ax) + " of " + shape_str(s));
  }
  const std::size_t outer = prod(s, 0, ax);
  const std::size_t inner = prod(s, ax + 1, s.size());
  const std::size_t in_row = static_cast<std::size_t>(s[ax]) * inner;
  const std::size_t out_row = static_cast<std::size_t>(end - begin) * inner;
  const std::size_t off = static_cast<std::size_t>(begin) * inner;
  Shape out_shape = s;
  out_shape[ax] = end - begin;
  std::vector<Scalar> out(outer * out_row);
  auto v = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(v.data() + o * in_row + off, out_row, out.data() + o * out_row);
  }
  return make_result(std::move(out_shape), std::move(out), {x},
                     [outer, in_row, out_row, off](Node& self) {
                       Node& X = *self.inputs[0];
                       for (std::size_t o = 0; o < outer; ++o) {
                         const Scalar* g = self.grad.data() + o * out_row;
                         Scalar* dx = X.grad.data() + o * in_row + off;
                         for (std::size_t q = 0; q < out_row; ++q) dx[q] += g[q];
                       }
                     });
}

Tensor gather(const Tensor& x, int axis, std::span<const int> index) {
  const Shape& s = x.shape();
  const int ax = normalize_axis(axis, x.rank(), "gather");
  if (index.empty()) throw ShapeError("gather: empty index on " + shape_str(s));
  for (int id : index) {
    if (id < 0 || id >= s[ax]) {
      throw ShapeError("gather: index " + std::to_string(id) +
                       " out of range for axis " + std::to_string(ax) + " of " +
                       shape_str(s));
    }
  }
  const std::size_t outer = prod(s, 0, ax);
  const std::size_t inner = prod(s, ax + 1, s.size());
  const std::size_t D = s[ax];
  std::vector<int> idx(index.begin(), index.end());
  Shape out_shape = s;
  out_shape[ax] = static_cast<int>(idx.size());
  std::vector<Scalar> out(outer * idx.size() * inner);
  auto v = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < idx.size(); ++j)
      std::copy_n(v.data() + (o * D + idx[j]) * inner, inner,
                  out.data() + (o * idx.size() + j) * inner);
  return make_result(std::move(out_shape), std::move(out), {x},
                     [outer, inner, D, idx](Node& self) {
                       Node& X = *self.inputs[0];
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t j = 0; j < idx.size(); ++j) {
                           const Scalar* g = self.grad.data() + (o * idx.size() + j) * inner;
                           Scalar* dx = X.grad.data() + (o * D + idx[j]) * inner;
                           for (std::size_t t = 0; t < inner; ++t) dx[t] += g[t];
                         }
                     });
}

Tensor expand(const Tensor& x, int axis, int n) {
  const Shape& s = x.shape();
  if (axis < 0) axis += x.rank() + 1;
  if (axis < 0 || axis > x.rank() || n <= 0) {
    throw ShapeError("expand: invalid axis " + std::to_string(axis) + " or count " +
                     std::to_string(n) + " for " + shape_str(s));
  }
  const std::size_t outer = prod(s, 0, axis);
  const std::size_t inner = prod(s, axis, s.size());
  Shape out_shape = s;
  out_shape.insert(out_shape.begin() + axis, n);
  const std::size_t reps = n;
  std::vector<Scalar> out(outer * reps * inner);
  auto v = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t r = 0; r < reps; ++r)
      std::copy_n(v.data() + o * inner, inner, out.data() + (o * reps + r) * inner);
  return make_result(std::move(out_shape), std::move(out), {x},
                     [outer, inner, reps](Node& self) {
                       Node& X = *self.inputs[0];
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t r = 0; r < reps; ++r) {
                           const Scalar* g = self.grad.data() + (o * reps + r) * inner;
                           Scalar* dx = X.grad.data() + o * inner;
                           for (std::size_t t = 0; t < inner; ++t) dx[t] += g[t];
                         }
                     });
}

Tensor mean(const Tensor& x, int axis) {
  const Shape& s = x.shape();
  const int ax = normalize_axis(axis, x.rank(), "mean");
  const std::size_t outer = prod(s, 0, ax);
  const std::size_t D = s[ax];
  const std::size_t inner = prod(s, ax + 1, s.size());
  Shape out_shape = s;
  out_shape.erase(out_shape.begin() + ax);
  if (out_shape.empty()) out_shape = {1};
  std::vector<Scalar> out(outer * inner, Scalar(0));
  auto v = x.data();
  const Scalar inv = Scalar(1) / static_cast<Scalar>(D);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t t = 0; t < inner; ++t)
        out[o * inner + t] += v[(o * D + d) * inner + t];
  for (auto& e : out) e *= inv;
  return make_result(std::move(out_shape), std::move(out), {x},
                     [outer, D, inner, inv](Node& self) {
                       Node& X = *self.inputs[0];
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t d = 0; d < D; ++d)
                           for (std::size_t t = 0; t < inner; ++t)
                             X.grad[(o * D + d) * inner + t] += inv * self.grad[o * inner + t];
                     });
}

Tensor sum(const Tensor& x) {
  Scalar total = 0;
  for (Scalar v : x.data()) total += v;
  return make_result({1}, {total}, {x}, [](Node& self) {
    Node& X = *self.inputs[0];
    const Scalar g = self.grad[0];
    for (auto& d : X.grad) d += g;
  });
}

Tensor mean_all(const Tensor& x) {
  return scale(sum(x), Scalar(1) / static_cast<Scalar>(x.numel()));
}

Tensor weighted_sum(const Tensor& x, std::span<const Scalar> w) {
  if (w.size() != x.numel()) {
    throw ShapeError("weighted_sum: " + std::to_string(w.size()) +
                     " weights for tensor " + shape_str(x.shape()));
  }
  Scalar total = 0;
  auto v = x.data();
  for (std::size_t i = 0; i < w.size(); ++i) total += v[i] * w[i];
  std::vector<Scalar> weights(w.begin(), w.end());
  return make_result({1}, {total}, {x}, [weights](Node& self) {
    Node& X = *self.inputs[0];
    const Scalar g = self.grad[0];
    for (std::size_t i = 0; i < weights.size(); ++i) X.grad[i] += g * weights[i];
  });
}

Tensor bce_with_logits(const Tensor& logits, std::span<const Scalar> target,
                       std::span<const Scalar> weight) {
  const std::size_t n = logits.numel();
  if (target.size() != n || weight.size() != n) {
    throw ShapeError("bce_with_logits: logits " + shape_str(logits.shape()) +
                     " with " + std::to_string(target.size()) + " targets and " +
                     std::to_string(weight.size()) + " weights");
  }
  Scalar wsum = 0;
  for (Scalar w : weight) wsum += w;
  if (wsum <= 0) return make_result({1}, {Scalar(0)}, {logits}, [](Node&) {});
  auto x = logits.data();
  Scalar total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (weight[i] == 0) continue;
    const Scalar v = x[i];
    total += weight[i] *
             (std::max(v, Scalar(0)) - v * target[i] + std::log1p(std::exp(-std::abs(v))));
  }
  std::vector<Scalar> t(target.begin(), target.end());
  std::vector<Scalar> w(weight.begin(), weight.end());
  return make_result({1}, {total / wsum}, {logits}, [t, w, wsum](Node& self) {
    Node& X = *self.inputs[0];
    const Scalar g = self.grad[0] / wsum;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] == 0) continue;
      const Scalar sig = Scalar(1) / (Scalar(1) + std::exp(-X.value[i]));
      X.grad[i] += g * w[i] * (sig - t[i]);
    }
  });
}

}  // namespace rmae::inline RMAE_ABI
