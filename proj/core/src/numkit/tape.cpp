#include "clseq/numkit/tape.hpp"

#include "clseq/error.hpp"

namespace clseq::numkit {

void Tape::backward(const TensorPtr& loss) {
    check(loss != nullptr, "backward: null loss");
    check(loss->is_scalar(), "backward: loss must be scalar, got shape " + shape_str(loss->shape));
    loss->ensure_grad();
    loss->g[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

}  // namespace clseq::numkit
