#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clseq/clbench/metrics.hpp"

namespace clseq::clbench {

struct StageClock {
    std::string label;
    double seconds = 0.0;
};

/// The persisted result of one experiment. Error rates are rendered as
/// percentages in every on-disk artifact; the metric series must always be
/// recomputable from the matrix and references.
struct ExperimentRecord {
    std::string config_hash;
    std::string refs_hash;
    std::string strategy;
    std::uint64_t seed = 0;
    std::vector<std::string> language_order;  // incremental task labels, in learned order
    WerMatrix matrix;
    std::optional<ReferenceWers> refs;
    MetricSeries metrics;
    std::vector<StageClock> wall_clock;
    std::string budget_warning;
};

/// All writes are atomic: a temp file in the same directory, then a rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

std::string render_wer_matrix_csv(const WerMatrix& m);
WerMatrix parse_wer_matrix_csv(const std::string& text);
std::string render_metrics_csv(const MetricSeries& s);

void save_record(const ExperimentRecord& record, const std::filesystem::path& dir);
ExperimentRecord load_record(const std::filesystem::path& json_path);

/// One CSV per metric: stage, metric, value, std (std left empty here).
void emit_plot_data(const ExperimentRecord& record, const std::filesystem::path& dir);

}  // namespace clseq::clbench
