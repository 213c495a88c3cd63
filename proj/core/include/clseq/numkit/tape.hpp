#pragma once

#include <functional>
#include <vector>

#include "clseq/numkit/tensor.hpp"

namespace clseq::numkit {

/// Records the backward closures of primitive operations in execution order.
/// Operations are appended as they run, so the list is topologically sorted
/// by construction; backward() replays it once, in reverse.
class Tape {
public:
    void record(std::function<void()> backward_fn) {
        ops_.push_back(std::move(backward_fn));
    }

    /// Seeds d(loss)/d(loss) = 1 and propagates gradients through every
    /// recorded operation. The loss must be a scalar reachable from this tape.
    void backward(const TensorPtr& loss);

    std::size_t size() const { return ops_.size(); }
    void clear() { ops_.clear(); }

private:
    std::vector<std::function<void()>> ops_;
};

}  // namespace clseq::numkit
