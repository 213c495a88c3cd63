#include "clseq/numkit/optim.hpp"

#include <cmath>
#include <limits>

#include "clseq/error.hpp"

namespace clseq::numkit {

double clip_grad_norm(const ParamStore& params, double max_norm) {
    check(max_norm > 0.0, "clip_grad_norm: max_norm must be positive");
    double sq = 0.0;
    for (const auto& e : params) {
        if (e.frozen || e.tensor->g.empty()) continue;
        for (double g : e.tensor->g) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (const auto& e : params) {
            if (e.frozen || e.tensor->g.empty()) continue;
            for (double& g : e.tensor->g) g *= s;
        }
    }
    return norm;
}

AdamW::AdamW(AdamWConfig cfg) : cfg_(cfg), best_metric_(std::numeric_limits<double>::infinity()) {
    check(cfg_.lr > 0.0, "adamw: learning rate must be positive");
}

void AdamW::step(const ParamStore& params) {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (const auto& e : params) {
        if (e.frozen) continue;
        auto& t = *e.tensor;
        if (t.g.empty()) continue;
        auto& slot = slots_[e.name];
        if (slot.m.empty()) {
            slot.m.assign(t.size(), 0.0);
            slot.v.assign(t.size(), 0.0);
        }
        check(slot.m.size() == t.size(),
              "adamw: parameter '" + e.name + "' changed size mid-run");
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double g = t.g[i];
            slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * g;
            slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = slot.m[i] / bc1;
            const double vhat = slot.v[i] / bc2;
            t.v[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                 cfg_.weight_decay * t.v[i]);
        }
        t.zero_grad();
    }
}

double AdamW::plateau_decay(double val_metric, double factor) {
    check(factor > 0.0 && factor < 1.0, "plateau_decay: factor must be in (0, 1)");
    if (val_metric >= best_metric_) {
        cfg_.lr *= factor;
    } else {
        best_metric_ = val_metric;
    }
    return cfg_.lr;
}

void AdamW::set_lr(double lr) {
    check(lr > 0.0, "adamw: learning rate must be positive");
    cfg_.lr = lr;
}

}  // namespace clseq::numkit
