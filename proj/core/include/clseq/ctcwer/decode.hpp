#pragma once

#include <vector>

#include "clseq/numkit/tensor.hpp"

namespace clseq::ctcwer {

/// Per-frame argmax, collapse consecutive repeats, strip blanks.
/// `usable_cols`, when nonzero, restricts the argmax to the first columns
/// (suppresses trailing special rows such as language-token entries).
std::vector<int> greedy_decode(const numkit::Tensor& log_probs, std::size_t usable_cols = 0);

}  // namespace clseq::ctcwer
