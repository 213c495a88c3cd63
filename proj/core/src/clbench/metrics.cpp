#include "clseq/clbench/metrics.hpp"

#include "clseq/error.hpp"

namespace clseq::clbench {

void WerMatrix::append_row(std::vector<double> row, std::string label) {
    check(row.size() == rows_.size() + 1,
          cat("wer_matrix: row ", rows_.size() + 1, " must have ", rows_.size() + 1,
              " entries, got ", row.size()));
    for (double v : row) check(v >= 0.0, "wer_matrix: negative error rate");
    rows_.push_back(std::move(row));
    labels_.push_back(std::move(label));
}

double WerMatrix::at(int t, int i) const {
    check(t >= 1 && t <= tasks(), cat("wer_matrix: stage ", t, " out of range"));
    check(i >= 1 && i <= t, cat("wer_matrix: entry (", t, ", ", i, ") is above the diagonal"));
    return rows_[t - 1][i - 1];
}

const std::vector<double>& WerMatrix::row(int t) const {
    check(t >= 1 && t <= tasks(), cat("wer_matrix: stage ", t, " out of range"));
    return rows_[t - 1];
}

double ReferenceWers::joint_for(int t) const {
    check(t >= 2 && t - 2 < static_cast<int>(joint.size()),
          cat("references: no joint value for task ", t));
    return joint[t - 2];
}

double ReferenceWers::solo_for(int t) const {
    check(t >= 2 && t - 2 < static_cast<int>(solo.size()),
          cat("references: no solo value for task ", t));
    return solo[t - 2];
}

double awer(const WerMatrix& m, int t) {
    double sum = 0.0;
    for (int i = 1; i <= t; ++i) sum += m.at(t, i);
    return sum / static_cast<double>(t);
}

double bwt(const WerMatrix& m, int t) {
    check(t >= 2, "bwt: defined for t >= 2");
    double sum = 0.0;
    for (int i = 1; i < t; ++i) sum += m.at(i, i) - m.at(t, i);
    return sum / static_cast<double>(t - 1);
}

double im(const WerMatrix& m, const ReferenceWers& refs, int t) {
    check(t >= 2, "im: defined for t >= 2");
    return m.at(t, t) - refs.joint_for(t);
}

double fwt(const WerMatrix& m, const ReferenceWers& refs, int t) {
    check(t >= 2, "fwt: defined for t >= 2");
    return refs.solo_for(t) - m.at(t, t);
}

double column_mean(std::span<const double> column) {
    check(!column.empty(), "column_mean: empty column");
    double sum = 0.0;
    for (double v : column) sum += v;
    return sum / static_cast<double>(column.size());
}

MetricSeries compute_series(const WerMatrix& m, const ReferenceWers* refs) {
    MetricSeries s;
    for (int t = 1; t <= m.tasks(); ++t) s.awer.push_back(awer(m, t));
    for (int t = 2; t <= m.tasks(); ++t) s.bwt.push_back(bwt(m, t));
    if (refs != nullptr) {
        s.im.emplace();
        s.fwt.emplace();
        for (int t = 2; t <= m.tasks(); ++t) {
            s.im->push_back(im(m, *refs, t));
            s.fwt->push_back(fwt(m, *refs, t));
        }
    }
    return s;
}

}  // namespace clseq::clbench
