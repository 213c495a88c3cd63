#include "clseq/numkit/ops.hpp"

#include <algorithm>
#include <cmath>

#include "clseq/error.hpp"

namespace clseq::numkit {

namespace {

void require_2d(const char* op, const TensorPtr& t) {
    check(t != nullptr, cat(op, ": null input"));
    check(t->shape.size() == 2, cat(op, ": expected 2-d tensor, got ", shape_str(t->shape)));
}

void require_same_shape(const char* op, const TensorPtr& a, const TensorPtr& b) {
    require_2d(op, a);
    require_2d(op, b);
    check(a->shape == b->shape,
          cat(op, ": shape mismatch ", shape_str(a->shape), " vs ", shape_str(b->shape)));
}

TensorPtr make_out(Shape shape, bool requires_grad) {
    auto t = tensor(std::move(shape));
    t->requires_grad = requires_grad;
    return t;
}

bool track(Tape* tape, const TensorPtr& out) { return tape != nullptr && out->requires_grad; }

}  // namespace

TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    require_2d("matmul", a);
    require_2d("matmul", b);
    check(a->cols() == b->rows(),
          cat("matmul: incompatible shapes ", shape_str(a->shape), " and ", shape_str(b->shape)));
    const std::size_t m = a->rows(), k = a->cols(), n = b->cols();
    auto out = make_out({m, n}, a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a->v[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out->v[i * n + j] += av * b->v[p * n + j];
        }
    }
    if (track(tape, out)) {
        tape->record([a, b, out, m, k, n] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const double go = out->g[i * n + j];
                        if (go == 0.0) continue;
                        for (std::size_t p = 0; p < k; ++p)
                            a->g[i * k + p] += go * b->v[p * n + j];
                    }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double av = a->v[i * k + p];
                        if (av == 0.0) continue;
                        for (std::size_t j = 0; j < n; ++j)
                            b->g[p * n + j] += av * out->g[i * n + j];
                    }
            }
        });
    }
    return out;
}

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    require_same_shape("add", a, b);
    auto out = make_out(a->shape, a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] + b->v[i];
    if (track(tape, out)) {
        tape->record([a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->size(); ++i) a->g[i] += out->g[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < out->size(); ++i) b->g[i] += out->g[i];
            }
        });
    }
    return out;
}

TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    require_same_shape("sub", a, b);
    auto out = make_out(a->shape, a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] - b->v[i];
    if (track(tape, out)) {
        tape->record([a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->size(); ++i) a->g[i] += out->g[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < out->size(); ++i) b->g[i] -= out->g[i];
            }
        });
    }
    return out;
}

TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    require_same_shape("mul", a, b);
    auto out = make_out(a->shape, a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] * b->v[i];
    if (track(tape, out)) {
        tape->record([a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->size(); ++i) a->g[i] += out->g[i] * b->v[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < out->size(); ++i) b->g[i] += out->g[i] * a->v[i];
            }
        });
    }
    return out;
}

TensorPtr scale(Tape* tape, const TensorPtr& a, double c) {
    require_2d("scale", a);
    auto out = make_out(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] * c;
    if (track(tape, out)) {
        tape->record([a, out, c] {
            a->ensure_grad();
            for (std::size_t i = 0; i < out->size(); ++i) a->g[i] += out->g[i] * c;
        });
    }
    return out;
}

TensorPtr add_rowwise(Tape* tape, const TensorPtr& mat, const TensorPtr& row) {
    require_2d("add_rowwise", mat);
    require_2d("add_rowwise", row);
    check(row->rows() == 1 && row->cols() == mat->cols(),
          cat("add_rowwise: row shape ", shape_str(row->shape), " does not broadcast over ",
              shape_str(mat->shape)));
    const std::size_t r = mat->rows(), c = mat->cols();
    auto out = make_out(mat->shape, mat->requires_grad || row->requires_grad);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out->v[i * c + j] = mat->v[i * c + j] + row->v[j];
    if (track(tape, out)) {
        tape->record([mat, row, out, r, c] {
            if (mat->requires_grad) {
                mat->ensure_grad();
                for (std::size_t i = 0; i < r * c; ++i) mat->g[i] += out->g[i];
            }
            if (row->requires_grad) {
                row->ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) row->g[j] += out->g[i * c + j];
            }
        });
    }
    return out;
}

TensorPtr add_column_broadcast(Tape* tape, const TensorPtr& mat, const TensorPtr& weights,
                               std::size_t col) {
    require_2d("add_column_broadcast", mat);
    require_2d("add_column_broadcast", weights);
    check(weights->rows() == mat->cols(),
          cat("add_column_broadcast: weights ", shape_str(weights->shape),
              " incompatible with ", shape_str(mat->shape)));
    check(col < weights->cols(),
          cat("add_column_broadcast: column ", col, " out of range for ",
              shape_str(weights->shape)));
    const std::size_t r = mat->rows(), c = mat->cols(), n = weights->cols();
    auto out = make_out(mat->shape, mat->requires_grad || weights->requires_grad);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            out->v[i * c + j] = mat->v[i * c + j] + weights->v[j * n + col];
    if (track(tape, out)) {
        tape->record([mat, weights, out, r, c, n, col] {
            if (mat->requires_grad) {
                mat->ensure_grad();
                for (std::size_t i = 0; i < r * c; ++i) mat->g[i] += out->g[i];
            }
            if (weights->requires_grad) {
                weights->ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        weights->g[j * n + col] += out->g[i * c + j];
            }
        });
    }
    return out;
}

TensorPtr tanh(Tape* tape, const TensorPtr& a) {
    require_2d("tanh", a);
    auto out = make_out(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < out->size(); ++i) out->v[i] = std::tanh(a->v[i]);
    if (track(tape, out)) {
        tape->record([a, out] {
            a->ensure_grad();
            for (std::size_t i = 0; i < out->size(); ++i)
                a->g[i] += out->g[i] * (1.0 - out->v[i] * out->v[i]);
        });
    }
    return out;
}

TensorPtr sigmoid(Tape* tape, const TensorPtr& a) {
    require_2d("sigmoid", a);
    auto out = make_out(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < out->size(); ++i) out->v[i] = 1.0 / (1.0 + std::exp(-a->v[i]));
    if (track(tape, out)) {
        tape->record([a, out] {
            a->ensure_grad();
            for (std::size_t i = 0; i < out->size(); ++i)
                a->g[i] += out->g[i] * out->v[i] * (1.0 - out->v[i]);
        });
    }
    return out;
}

TensorPtr softmax_rows(Tape* tape, const TensorPtr& a) {
    require_2d("softmax_rows", a);
    const std::size_t r = a->rows(), c = a->cols();
    auto out = make_out(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < r; ++i) {
        double mx = a->v[i * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, a->v[i * c + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            out->v[i * c + j] = std::exp(a->v[i * c + j] - mx);
            z += out->v[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) out->v[i * c + j] /= z;
    }
    if (track(tape, out)) {
        tape->record([a, out, r, c] {
            a->ensure_grad();
            for (std::size_t i = 0; i < r; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j)
                    dot += out->g[i * c + j] * out->v[i * c + j];
                for (std::size_t j = 0; j < c; ++j)
                    a->g[i * c + j] += out->v[i * c + j] * (out->g[i * c + j] - dot);
            }
        });
    }
    return out;
}

TensorPtr log_softmax_rows(Tape* tape, const TensorPtr& a) {
    require_2d("log_softmax_rows", a);
    const std::size_t r = a->rows(), c = a->cols();
    auto out = make_out(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < r; ++i) {
        double mx = a->v[i * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, a->v[i * c + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(a->v[i * c + j] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < c; ++j) out->v[i * c + j] = a->v[i * c + j] - lse;
    }
    if (track(tape, out)) {
        tape->record([a, out, r, c] {
            a->ensure_grad();
            for (std::size_t i = 0; i < r; ++i) {
                double gsum = 0.0;
                for (std::size_t j = 0; j < c; ++j) gsum += out->g[i * c + j];
                for (std::size_t j = 0; j < c; ++j)
                    a->g[i * c + j] += out->g[i * c + j] - std::exp(out->v[i * c + j]) * gsum;
            }
        });
    }
    return out;
}

TensorPtr sum(Tape* tape, const TensorPtr& a) {
    require_2d("sum", a);
    double s = 0.0;
    for (double x : a->v) s += x;
    auto out = make_out({1, 1}, a->requires_grad);
    out->v[0] = s;
    if (track(tape, out)) {
        tape->record([a, out] {
            a->ensure_grad();
            for (std::size_t i = 0; i < a->size(); ++i) a->g[i] += out->g[0];
        });
    }
    return out;
}

TensorPtr mean(Tape* tape, const TensorPtr& a) {
    require_2d("mean", a);
    double s = 0.0;
    for (double x : a->v) s += x;
    const double inv = 1.0 / static_cast<double>(a->size());
    auto out = make_out({1, 1}, a->requires_grad);
    out->v[0] = s * inv;
    if (track(tape, out)) {
        tape->record([a, out, inv] {
            a->ensure_grad();
            for (std::size_t i = 0; i < a->size(); ++i) a->g[i] += out->g[0] * inv;
        });
    }
    return out;
}

TensorPtr concat_rows(Tape* tape, const std::vector<TensorPtr>& parts) {
    check(!parts.empty(), "concat_rows: empty input list");
    const std::size_t c = parts.front()->cols();
    std::size_t r = 0;
    bool req = false;
    for (const auto& p : parts) {
        require_2d("concat_rows", p);
        check(p->cols() == c, cat("concat_rows: column mismatch ", shape_str(p->shape),
                                  " vs expected width ", c));
        r += p->rows();
        req = req || p->requires_grad;
    }
    auto out = make_out({r, c}, req);
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p->v.begin(), p->v.end(), out->v.begin() + off);
        off += p->size();
    }
    if (track(tape, out)) {
        tape->record([parts, out] {
            std::size_t pos = 0;
            for (const auto& p : parts) {
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::size_t i = 0; i < p->size(); ++i) p->g[i] += out->g[pos + i];
                }
                pos += p->size();
            }
        });
    }
    return out;
}

TensorPtr slice_rows(Tape* tape, const TensorPtr& a, std::size_t row_begin, std::size_t row_end) {
    require_2d("slice_rows", a);
    check(row_begin < row_end && row_end <= a->rows(),
          cat("slice_rows: range [", row_begin, ", ", row_end, ") invalid for ",
              shape_str(a->shape)));
    const std::size_t c = a->cols();
    auto out = make_out({row_end - row_begin, c}, a->requires_grad);
    std::copy(a->v.begin() + row_begin * c, a->v.begin() + row_end * c, out->v.begin());
    if (track(tape, out)) {
        tape->record([a, out, row_begin, c] {
            a->ensure_grad();
            for (std::size_t i = 0; i < out->size(); ++i) a->g[row_begin * c + i] += out->g[i];
        });
    }
    return out;
}

TensorPtr slice_cols(Tape* tape, const TensorPtr& a, std::size_t col_begin, std::size_t col_end) {
    require_2d("slice_cols", a);
    check(col_begin < col_end && col_end <= a->cols(),
          cat("slice_cols: range [", col_begin, ", ", col_end, ") invalid for ",
              shape_str(a->shape)));
    const std::size_t r = a->rows(), c = a->cols(), w = col_end - col_begin;
    auto out = make_out({r, w}, a->requires_grad);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < w; ++j) out->v[i * w + j] = a->v[i * c + col_begin + j];
    if (track(tape, out)) {
        tape->record([a, out, r, c, w, col_begin] {
            a->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < w; ++j)
                    a->g[i * c + col_begin + j] += out->g[i * w + j];
        });
    }
    return out;
}

TensorPtr masked_values(Tape* tape, const TensorPtr& base, const TensorPtr& real_weights,
                        double threshold) {
    require_same_shape("masked_values", base, real_weights);
    auto out = make_out(base->shape, real_weights->requires_grad);
    for (std::size_t i = 0; i < out->size(); ++i)
        out->v[i] = real_weights->v[i] > threshold ? base->v[i] : 0.0;
    if (track(tape, out)) {
        tape->record([base, real_weights, out] {
            real_weights->ensure_grad();
            for (std::size_t i = 0; i < out->size(); ++i)
                real_weights->g[i] += out->g[i] * base->v[i];
        });
    }
    return out;
}

}  // namespace clseq::numkit
