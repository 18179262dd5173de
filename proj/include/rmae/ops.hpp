#pragma once

#include <span>
#include <vector>

#include "rmae/tensor.hpp"

// Differentiable tensor operations. Binary elementwise ops accept equal shapes
// or one operand whose shape is a suffix of the other's (leading-axis
// expansion); anything else is a ShapeError naming both shapes.

namespace rmae::inline RMAE_ABI {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar s);

// a: [..., M, K] with b: [K, N], or batched a: [B..., M, K] with b: [B..., K, N].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor gelu(const Tensor& x);
Tensor softmax(const Tensor& x);  // over the last axis
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 Scalar eps = Scalar(1e-6));

Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x, int axis0, int axis1);
Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor slice(const Tensor& x, int axis, int begin, int end);
Tensor gather(const Tensor& x, int axis, std::span<const int> index);
// Inserts a new axis of length n at `axis`, repeating x along it.
Tensor expand(const Tensor& x, int axis, int n);

Tensor mean(const Tensor& x, int axis);  // removes the axis
Tensor sum(const Tensor& x);             // shape [1]
Tensor mean_all(const Tensor& x);

// Sum of x * w with a constant weight vector of the same length.
Tensor weighted_sum(const Tensor& x, std::span<const Scalar> w);

// Mean binary cross-entropy on logits, weighted elementwise; normalized by
// the weight total.
Tensor bce_with_logits(const Tensor& logits, std::span<const Scalar> target,
                       std::span<const Scalar> weight);

// Dense row-major C (+)= op(A) * op(B); exposed for tests and the FLOPs
// cross-check.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const Scalar* a,
          const Scalar* b, Scalar* c, bool accumulate);

}  // namespace rmae::inline RMAE_ABI
