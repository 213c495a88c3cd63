#pragma once

#include <vector>

#include "clseq/numkit/ops.hpp"

namespace clseq::ctcwer {

constexpr int kBlank = 0;

/// Feasibility rule: the extended target (blanks interleaved) fits in the
/// frame count, i.e. time >= |target| + number of adjacent repeats.
bool ctc_feasible(std::size_t time, const std::vector<int>& target);

/// Negative log probability of all blank-augmented alignments of `target`
/// under per-frame log scores `log_probs` (time x vocab, blank = column 0).
/// Computed in log space; gradients flow back to log_probs.
/// Infeasible targets are an error, not an infinite loss.
numkit::TensorPtr ctc_loss(numkit::Tape* tape, const numkit::TensorPtr& log_probs,
                           const std::vector<int>& target);

}  // namespace clseq::ctcwer
