#pragma once

#include <optional>
#include <span>
#include <vector>

#include "flat/tensor.hpp"

namespace flat::ad {

// Forward ops. Each records a backward rule on the active tape when any
// input carries grad storage. Shapes are validated strictly; a mismatch
// throws ShapeError naming the op and the offending shapes.

/// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise a + b on equal shapes, or [m,n] + [n] broadcasting the
/// vector across rows (bias add).
Tensor add(const Tensor& a, const Tensor& b);

/// Elementwise a - b on equal shapes.
Tensor sub(const Tensor& a, const Tensor& b);

/// Elementwise a * b on equal shapes, or [m,n] * [m] scaling row i of the
/// matrix by b[i] (per-position mask scaling).
Tensor mul(const Tensor& a, const Tensor& b);

/// c * x for a plain double constant.
Tensor scalar_mul(const Tensor& x, double c);

/// Valid (no padding) 1-D convolution over a [n,d] sequence with filters
/// [F,w,d]; output [n-w+1, F].
Tensor conv1d(const Tensor& x, const Tensor& filters);

/// Column-wise max over a [T,F] matrix -> [1,F]. Ties route the gradient to
/// the earliest row.
Tensor max_pool_over_time(const Tensor& x);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Row-wise softmax / log-softmax. A 1-D input is treated as a single row.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);

/// Gathers rows of table [V,d] at ids -> [n,d]. Backward scatter-adds into
/// the table rows.
Tensor embedding_lookup(const Tensor& table, std::span<const int> ids);

/// Concatenation along axis 0 (1-D tensors) or axis 0/1 (2-D tensors).
Tensor concat(std::span<const Tensor> parts, int axis);

/// Full reductions to a scalar [1].
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Column j of a [m,n] matrix as a length-m vector.
Tensor select_column(const Tensor& x, int j);

/// Elementwise |x|; subgradient at 0 is 0.
Tensor abs_val(const Tensor& x);

/// One SGD update: params <- params - lr * g, where g is the gradient set,
/// globally norm-clipped to clip_norm when given. Clears grads and bumps
/// parameter versions. Throws if any param is missing grad storage.
void sgd_step(std::span<Tensor> params, double lr, std::optional<double> clip_norm = std::nullopt);

}  // namespace flat::ad
