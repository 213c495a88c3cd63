#pragma once

#include <vector>

#include "clseq/numkit/tape.hpp"
#include "clseq/numkit/tensor.hpp"

namespace clseq::numkit {

// Differentiable primitives. Each computes its output eagerly and, when a
// tape is given and any input requires a gradient, records a backward
// closure on it. Passing tape == nullptr runs pure inference.

TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(Tape* tape, const TensorPtr& a, double c);

/// mat (r x c) + row (1 x c) broadcast over rows.
TensorPtr add_rowwise(Tape* tape, const TensorPtr& mat, const TensorPtr& row);

/// mat (r x c) + column `col` of weights (c x n) broadcast over rows.
/// Lets an embedding column double as an additive conditioning vector.
TensorPtr add_column_broadcast(Tape* tape, const TensorPtr& mat, const TensorPtr& weights,
                               std::size_t col);

TensorPtr tanh(Tape* tape, const TensorPtr& a);
TensorPtr sigmoid(Tape* tape, const TensorPtr& a);

TensorPtr softmax_rows(Tape* tape, const TensorPtr& a);
TensorPtr log_softmax_rows(Tape* tape, const TensorPtr& a);

TensorPtr sum(Tape* tape, const TensorPtr& a);
TensorPtr mean(Tape* tape, const TensorPtr& a);

TensorPtr concat_rows(Tape* tape, const std::vector<TensorPtr>& parts);
TensorPtr slice_rows(Tape* tape, const TensorPtr& a, std::size_t row_begin, std::size_t row_end);
TensorPtr slice_cols(Tape* tape, const TensorPtr& a, std::size_t col_begin, std::size_t col_end);

/// base .* (real_weights > threshold), with a straight-through backward:
/// thresholding is treated as identity, so d(out)/d(real_weights) = base.
/// The base tensor itself never receives gradient through this op.
TensorPtr masked_values(Tape* tape, const TensorPtr& base, const TensorPtr& real_weights,
                        double threshold);

}  // namespace clseq::numkit
