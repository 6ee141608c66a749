#pragma once

#include "draftlab/tensor.hpp"

#include <utility>
#include <vector>

// Differentiable operations. Each op validates shapes, computes its result
// through the kernels layer where a dense loop exists, and records a backward
// closure only when some input requires gradient. registered_op_names() lists
// every op; the gradient-integrity tests iterate that list so a new op cannot
// be added without entering the finite-difference gate.

namespace draft::ops {

// Names of all registered ops, in a stable order.
const std::vector<std::string>& registered_op_names();

// c[m,n] = a[m,k] * b[k,n]
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);

// c[m,n] = a[m,k] * b[n,k]^T (b stored row-major as [n,k])
TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b);

// Elementwise on identical shapes.
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);

// y = s * x for a plain constant s.
TensorPtr scale(const TensorPtr& x, double s);

// y[i,j] = x[i,j] + b[j] for rank-1 b.
TensorPtr add_bias(const TensorPtr& x, const TensorPtr& b);

TensorPtr relu(const TensorPtr& x);

// Row-wise normalization with affine terms: gain and bias are rank-1 of
// width cols(x). Uses the biased variance with epsilon inside the sqrt.
TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain,
                     const TensorPtr& bias, real epsilon = real(1e-5));

// Row-wise softmax over positions where mask is 1; masked positions produce
// exactly 0 in the output and receive exactly 0 gradient. mask is row-major
// [rows*cols] and every row must keep at least one position.
TensorPtr masked_softmax(const TensorPtr& x,
                         std::vector<unsigned char> mask);

// Valid 1-d convolution over rows: x is [t, c_in], w is [k*c_in, c_out] with
// the tap index varying slowest. Output has (t - k) / stride + 1 rows.
TensorPtr conv1d(const TensorPtr& x, const TensorPtr& w, int stride);

// Prepends `count` zero rows (the causal padding of the front-end).
TensorPtr pad_rows_front(const TensorPtr& x, int count);

TensorPtr sum(const TensorPtr& x);
TensorPtr mean(const TensorPtr& x);

// Mean absolute error over all elements of two same-shape tensors.
TensorPtr l1_loss(const TensorPtr& pred, const TensorPtr& target);

// Row-wise log softmax (no mask; used by classification heads).
TensorPtr log_softmax_rows(const TensorPtr& x);

// Mean over rows of -logp[i, labels[i]].
TensorPtr nll_rows(const TensorPtr& log_probs, std::vector<int> labels);

// Row selection; duplicate indices are allowed and their gradients add.
TensorPtr gather_rows(const TensorPtr& x, std::vector<int> indices);

TensorPtr slice_rows(const TensorPtr& x, int begin, int count);
TensorPtr slice_cols(const TensorPtr& x, int begin, int count);

// Column-wise concatenation of rank-2 tensors with equal row counts.
TensorPtr concat_cols(const std::vector<TensorPtr>& parts);

// Copy of x with the rows at `indices` (unique, in range) replaced by the
// single row of `replacement` ([1, cols]). Replaced rows pass no gradient
// back to x; replacement accumulates gradient from every index.
TensorPtr replace_rows(const TensorPtr& x, const TensorPtr& replacement,
                       std::vector<int> indices);

// y_i = x_i / sqrt(|x_i|^2 + 1e-12), row-wise.
TensorPtr l2_normalize_rows(const TensorPtr& x);

// Dot products between selected rows of a and b, arranged as a [rows, cols]
// matrix: entry (r, c) is dot(a[pairs[r*cols+c].first], b[pairs[r*cols+c].second]).
TensorPtr gathered_dot(const TensorPtr& a, const TensorPtr& b,
                       const std::vector<std::pair<int, int>>& pairs, int rows,
                       int cols);

// CTC loss of one utterance: log_probs is [t, vocab] (blank = column 0),
// labels are non-blank ids. Internally double; returns the scalar -log P.
TensorPtr ctc_loss(const TensorPtr& log_probs, const std::vector<int>& labels);

}  // namespace draft::ops
