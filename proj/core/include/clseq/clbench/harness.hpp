#pragma once

#include <map>

#include "clseq/clbench/config.hpp"
#include "clseq/clbench/record.hpp"
#include "clseq/strategies/strategy.hpp"

namespace clseq::clbench {

/// All generated languages for a config, indexed by language id.
struct LanguageSet {
    std::vector<synthlang::TaskData> all;
    std::vector<int> base_ids;
    std::vector<int> new_ids;  // default learning order
};

LanguageSet build_languages(const ExperimentConfig& cfg);

/// Task sequence for one run: the joint base task, then one task per new
/// language in the requested order.
std::vector<strategies::TaskView> tasks_for_order(const LanguageSet& set,
                                                  const std::vector<int>& new_order);

/// Reference error rates keyed by language id, so one set serves every
/// ordering and strategy under the same data/model/train config.
struct ReferencePool {
    std::map<int, double> joint;
    std::map<int, double> solo;
};

ReferenceWers select_references(const ReferencePool& pool, const std::vector<int>& new_order);

/// Artifacts reusable across runs that share a refs_hash: the pretrained
/// base model and the reference error rates.
struct RunCache {
    std::string key;
    std::optional<numkit::Checkpoint> base_model;
    std::optional<ReferencePool> refs;

    void rekey(const std::string& new_key);
};

struct RunResult {
    ExperimentRecord record;
    std::vector<double> agem_dots;  // per-step projection diagnostics, A-GEM only
};

/// The full protocol: base pretraining, then per new language
/// prepare -> train -> finalize -> evaluate-all-seen. Artifacts are written
/// under out_dir when it is nonempty.
RunResult run_sequence(const ExperimentConfig& cfg,
                       const std::filesystem::path& out_dir = {},
                       const std::vector<int>* order = nullptr, RunCache* cache = nullptr);

/// One joint model over all languages plus one solo fine-tune per new
/// language, evaluated with the same pipeline as the main runs.
ReferencePool run_references(const ExperimentConfig& cfg,
                             const std::filesystem::path& out_dir = {},
                             RunCache* cache = nullptr);

struct OrderingSummary {
    struct Series {
        int first_stage = 1;
        std::vector<double> mean;
        std::vector<double> stddev;  // sample standard deviation
    };
    int n_orders = 0;
    Series awer, bwt, im, fwt;
    std::vector<ExperimentRecord> runs;
};

OrderingSummary ordering_study(const ExperimentConfig& cfg, int n_orders,
                               std::uint64_t order_seed,
                               const std::filesystem::path& out_dir = {});
std::string render_ordering_csv(const OrderingSummary& summary);

struct ImbalanceEntry {
    std::string strategy;
    std::string variant;  // "imbalanced" or "balanced"
    double first_bwt = 0.0;

    double drop_magnitude() const { return first_bwt < 0.0 ? -first_bwt : 0.0; }
};

struct ImbalanceSummary {
    std::vector<ImbalanceEntry> entries;
    const ImbalanceEntry& entry(const std::string& strategy, const std::string& variant) const;
};

/// Balanced variant trains the base task for task_epochs instead of
/// base_epochs; compares the first-stage forgetting of plain fine-tuning and
/// replay under both regimes.
ImbalanceSummary imbalance_study(const ExperimentConfig& cfg,
                                 const std::filesystem::path& out_dir = {});
std::string render_imbalance_csv(const ImbalanceSummary& summary);

/// Corpus error rate of one task under the strategy's evaluation selection;
/// the base task reports the unweighted mean over its member languages.
double evaluate_task(const seqmodel::Model& model, const strategies::Strategy& strategy,
                     const strategies::TaskView& task);

}  // namespace clseq::clbench
