#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "clseq/numkit/param_store.hpp"

namespace clseq::numkit {

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

/// Scales all unfrozen gradients so their global L2 norm does not exceed
/// max_norm; returns the pre-clip norm. All-zero gradients pass through.
double clip_grad_norm(const ParamStore& params, double max_norm);

/// Adam with decoupled weight decay, plus plateau-based learning-rate decay
/// keyed on a lower-is-better validation metric.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg);

    /// Applies one bias-corrected update to every unfrozen entry, then
    /// zeroes its gradient slot. Entries without gradients are skipped.
    void step(const ParamStore& params);

    /// Called once per epoch with the validation metric. A tie with the best
    /// value so far counts as no improvement and triggers the decay.
    /// Returns the (possibly reduced) learning rate.
    double plateau_decay(double val_metric, double factor);

    double lr() const { return cfg_.lr; }
    void set_lr(double lr);
    std::size_t step_count() const { return step_; }

private:
    struct Slot {
        std::vector<double> m;
        std::vector<double> v;
    };

    AdamWConfig cfg_;
    std::size_t step_ = 0;
    double best_metric_;
    std::unordered_map<std::string, Slot> slots_;
};

}  // namespace clseq::numkit
