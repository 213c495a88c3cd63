#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace clseq::clbench {

/// Lower-triangular record of task error rates: entry (t, i) is the error on
/// task i after training stage t, 1-based, defined for i <= t. Task 1 is the
/// joint base task; its entry is the mean over the base languages.
class WerMatrix {
public:
    void append_row(std::vector<double> row, std::string label);

    int tasks() const { return static_cast<int>(rows_.size()); }
    double at(int t, int i) const;
    const std::vector<double>& row(int t) const;
    const std::vector<std::string>& labels() const { return labels_; }

    bool operator==(const WerMatrix&) const = default;

private:
    std::vector<std::vector<double>> rows_;
    std::vector<std::string> labels_;
};

/// Reference error rates for the incremental tasks t = 2..T: the jointly
/// trained model and the per-task solo fine-tuned model.
struct ReferenceWers {
    std::vector<double> joint;  // index 0 corresponds to task 2
    std::vector<double> solo;

    double joint_for(int t) const;
    double solo_for(int t) const;
};

/// Mean error over all tasks seen after stage t.
double awer(const WerMatrix& m, int t);

/// Mean gain on previously learned tasks; negative values are forgetting.
double bwt(const WerMatrix& m, int t);

/// Gap between the sequential model and the joint reference on task t.
double im(const WerMatrix& m, const ReferenceWers& refs, int t);

/// Gap between the solo reference and the sequential model on task t.
double fwt(const WerMatrix& m, const ReferenceWers& refs, int t);

/// The aggregator behind every per-strategy "average" row: the plain mean of
/// a metric column.
double column_mean(std::span<const double> column);

struct MetricSeries {
    std::vector<double> awer;                // t = 1..T
    std::vector<double> bwt;                 // t = 2..T
    std::optional<std::vector<double>> im;   // t = 2..T, needs references
    std::optional<std::vector<double>> fwt;
};

MetricSeries compute_series(const WerMatrix& m, const ReferenceWers* refs);

}  // namespace clseq::clbench
