#include "clseq/ctcwer/ctc.hpp"

#include <cmath>
#include <limits>

#include "clseq/error.hpp"

namespace clseq::ctcwer {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Extended target: blanks interleaved, l' = [blank, y1, blank, y2, ..., blank].
int ext_label(const std::vector<int>& target, std::size_t s) {
    return (s % 2 == 0) ? kBlank : target[s / 2];
}

}  // namespace

bool ctc_feasible(std::size_t time, const std::vector<int>& target) {
    std::size_t repeats = 0;
    for (std::size_t i = 1; i < target.size(); ++i)
        if (target[i] == target[i - 1]) ++repeats;
    return time >= target.size() + repeats;
}

numkit::TensorPtr ctc_loss(numkit::Tape* tape, const numkit::TensorPtr& log_probs,
                           const std::vector<int>& target) {
    check(log_probs != nullptr && log_probs->shape.size() == 2, "ctc_loss: log_probs must be 2-d");
    const std::size_t time = log_probs->rows();
    const std::size_t vocab = log_probs->cols();
    for (int id : target)
        check(id > kBlank && static_cast<std::size_t>(id) < vocab,
              cat("ctc_loss: target token ", id, " outside vocabulary of size ", vocab));
    check(ctc_feasible(time, target),
          cat("ctc_loss: target of length ", target.size(),
              " cannot be aligned within ", time, " frames"));

    const std::size_t s_len = 2 * target.size() + 1;
    const auto lp = [&](std::size_t t, int k) { return log_probs->v[t * vocab + k]; };

    // Forward pass over the extended target lattice.
    std::vector<double> alpha(time * s_len, kNegInf);
    alpha[0] = lp(0, kBlank);
    if (s_len > 1) alpha[1] = lp(0, ext_label(target, 1));
    for (std::size_t t = 1; t < time; ++t) {
        for (std::size_t s = 0; s < s_len; ++s) {
            const int lab = ext_label(target, s);
            double acc = alpha[(t - 1) * s_len + s];
            if (s >= 1) acc = log_add(acc, alpha[(t - 1) * s_len + s - 1]);
            if (s >= 2 && lab != kBlank && lab != ext_label(target, s - 2))
                acc = log_add(acc, alpha[(t - 1) * s_len + s - 2]);
            if (acc != kNegInf) alpha[t * s_len + s] = acc + lp(t, lab);
        }
    }
    double log_p = alpha[(time - 1) * s_len + s_len - 1];
    if (s_len > 1) log_p = log_add(log_p, alpha[(time - 1) * s_len + s_len - 2]);
    check(log_p != kNegInf, "ctc_loss: no feasible alignment path");

    auto out = numkit::scalar(-log_p);
    out->requires_grad = log_probs->requires_grad;

    if (tape != nullptr && out->requires_grad) {
        // Suffix probabilities beta_t(s) exclude the emission at t, so the
        // path posterior through (t, s) is alpha_t(s) + beta_t(s).
        std::vector<double> beta(time * s_len, kNegInf);
        beta[(time - 1) * s_len + s_len - 1] = 0.0;
        if (s_len > 1) beta[(time - 1) * s_len + s_len - 2] = 0.0;
        for (std::size_t t = time - 1; t-- > 0;) {
            for (std::size_t s = 0; s < s_len; ++s) {
                double acc = beta[(t + 1) * s_len + s] + lp(t + 1, ext_label(target, s));
                if (s + 1 < s_len)
                    acc = log_add(acc, beta[(t + 1) * s_len + s + 1] +
                                           lp(t + 1, ext_label(target, s + 1)));
                const int lab = ext_label(target, s);
                if (s + 2 < s_len && lab != kBlank && lab != ext_label(target, s + 2))
                    acc = log_add(acc, beta[(t + 1) * s_len + s + 2] +
                                           lp(t + 1, ext_label(target, s + 2)));
                beta[t * s_len + s] = acc;
            }
        }
        tape->record([log_probs, out, target, alpha = std::move(alpha),
                      beta = std::move(beta), log_p, time, vocab, s_len] {
            log_probs->ensure_grad();
            const double upstream = out->g[0];
            for (std::size_t t = 0; t < time; ++t) {
                std::vector<double> occ(vocab, kNegInf);
                for (std::size_t s = 0; s < s_len; ++s) {
                    const int lab = ext_label(target, s);
                    occ[lab] = log_add(occ[lab], alpha[t * s_len + s] + beta[t * s_len + s]);
                }
                for (std::size_t k = 0; k < vocab; ++k) {
                    if (occ[k] == kNegInf) continue;
                    log_probs->g[t * vocab + k] -= upstream * std::exp(occ[k] - log_p);
                }
            }
        });
    }
    return out;
}

}  // namespace clseq::ctcwer
