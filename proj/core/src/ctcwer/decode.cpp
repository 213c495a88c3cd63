#include "clseq/ctcwer/decode.hpp"

#include "clseq/ctcwer/ctc.hpp"
#include "clseq/error.hpp"

namespace clseq::ctcwer {

std::vector<int> greedy_decode(const numkit::Tensor& log_probs, std::size_t usable_cols) {
    check(log_probs.shape.size() == 2 && log_probs.rows() >= 1,
          "greedy_decode: need at least one frame");
    const std::size_t cols = usable_cols == 0 ? log_probs.cols() : usable_cols;
    check(cols <= log_probs.cols(), "greedy_decode: usable_cols exceeds vocabulary");

    std::vector<int> out;
    int prev = kBlank;
    for (std::size_t t = 0; t < log_probs.rows(); ++t) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < cols; ++k)
            if (log_probs.at(t, k) > log_probs.at(t, best)) best = k;
        const int tok = static_cast<int>(best);
        if (tok != prev && tok != kBlank) out.push_back(tok);
        prev = tok;
    }
    return out;
}

}  // namespace clseq::ctcwer
