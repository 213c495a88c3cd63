#include "clseq/strategies/strategy.hpp"

#include <cmath>

#include "clseq/ctcwer/ctc.hpp"
#include "clseq/error.hpp"
#include "clseq/strategies/architecture.hpp"
#include "clseq/strategies/regularization.hpp"
#include "clseq/strategies/rehearsal.hpp"

namespace clseq::strategies {

std::string strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::ft: return "ft";
        case StrategyKind::er: return "er";
        case StrategyKind::agem: return "agem";
        case StrategyKind::der: return "der";
        case StrategyKind::pnn: return "pnn";
        case StrategyKind::pb: return "pb";
        case StrategyKind::l2p: return "l2p";
        case StrategyKind::ewc: return "ewc";
        case StrategyKind::lwf: return "lwf";
        case StrategyKind::mas: return "mas";
    }
    fail("strategy_name: bad kind");
}

StrategyKind strategy_from(const std::string& name) {
    for (StrategyKind k : {StrategyKind::ft, StrategyKind::er, StrategyKind::agem,
                           StrategyKind::der, StrategyKind::pnn, StrategyKind::pb,
                           StrategyKind::l2p, StrategyKind::ewc, StrategyKind::lwf,
                           StrategyKind::mas})
        if (strategy_name(k) == name) return k;
    fail("strategy_from: unknown strategy '" + name + "'");
}

bool is_architecture(StrategyKind kind) {
    return kind == StrategyKind::pnn || kind == StrategyKind::pb || kind == StrategyKind::l2p;
}

std::vector<const synthlang::Utterance*> TaskView::train_pool() const {
    std::vector<const synthlang::Utterance*> out;
    for (const auto* data : members)
        for (const auto& u : data->train.utts) out.push_back(&u);
    return out;
}

std::vector<const synthlang::Utterance*> TaskView::val_pool() const {
    std::vector<const synthlang::Utterance*> out;
    for (const auto* data : members)
        for (const auto& u : data->val.utts) out.push_back(&u);
    return out;
}

int TaskView::primary_lang() const {
    check(!members.empty(), "task view: no member languages");
    return members.front()->spec.lang_id;
}

void ReplayBuffer::retain(int task_index, std::vector<BufferEntry> entries) {
    per_task_[task_index] = std::move(entries);
}

const std::vector<BufferEntry>& ReplayBuffer::task_entries(int task_index) const {
    auto it = per_task_.find(task_index);
    check(it != per_task_.end(), cat("replay buffer: no entries for task ", task_index));
    return it->second;
}

std::vector<const BufferEntry*> ReplayBuffer::all() const {
    std::vector<const BufferEntry*> out;
    for (const auto& [task, entries] : per_task_)
        for (const auto& e : entries) out.push_back(&e);
    return out;
}

std::size_t ReplayBuffer::size() const {
    std::size_t n = 0;
    for (const auto& [task, entries] : per_task_) n += entries.size();
    return n;
}

double agem_project(std::span<const double> g_ref, std::span<double> g) {
    check(g_ref.size() == g.size(), "agem_project: gradient size mismatch");
    double dot = 0.0, ref_sq = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        dot += g[i] * g_ref[i];
        ref_sq += g_ref[i] * g_ref[i];
    }
    if (ref_sq == 0.0 || dot >= 0.0) return dot;
    const double coef = dot / ref_sq;
    double dot_after = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] -= coef * g_ref[i];
        dot_after += g[i] * g_ref[i];
    }
    return dot_after;
}

numkit::TensorPtr batch_ctc_loss(numkit::Tape* tape, const seqmodel::Model& model,
                                 std::span<const synthlang::Utterance* const> utts,
                                 const std::vector<seqmodel::Model::Sel>& sels) {
    check(!utts.empty(), "batch_ctc_loss: empty batch");
    check(sels.size() == utts.size(), "batch_ctc_loss: one selection per utterance");
    numkit::TensorPtr total;
    for (std::size_t i = 0; i < utts.size(); ++i) {
        auto logits = model.forward(tape, utts[i]->features, sels[i]);
        auto lp = numkit::log_softmax_rows(tape, logits);
        auto loss = ctcwer::ctc_loss(tape, lp, model.to_local_targets(utts[i]->tokens, sels[i]));
        total = total ? numkit::add(tape, total, loss) : loss;
    }
    return numkit::scale(tape, total, 1.0 / static_cast<double>(utts.size()));
}

numkit::TensorPtr Strategy::loss_hook(numkit::Tape*, numkit::TensorPtr base_loss, const Batch&,
                                      const seqmodel::Model&) {
    return base_loss;
}

void Strategy::grad_hook(const seqmodel::Model&, const numkit::ParamStore&, std::size_t,
                         numkit::Rng&) {}

void Strategy::update_importance(seqmodel::Model&, const TaskView&) {
    fail(cat("update_importance: not a regularization strategy: ", strategy_name(kind())));
}

void Strategy::collect_trainable(const seqmodel::Model& model, const TaskView& task,
                                 numkit::ParamStore& out) const {
    // Default: the whole persistent model, except heads of other tasks in the
    // per-language regime.
    const bool per_lang = model.config().regime == seqmodel::TokenRegime::per_language;
    const std::string own_head = cat("head.lang", task.primary_lang(), ".");
    for (const auto& e : model.params()) {
        if (per_lang && e.name.rfind("head.lang", 0) == 0 &&
            e.name.rfind(own_head, 0) != 0)
            continue;
        if (per_lang && !task.is_base() && e.name.rfind("head.base", 0) == 0) continue;
        out.add(e.name, e.tensor);
    }
}

seqmodel::Model::Sel Strategy::train_sel(const TaskView&, int lang) const {
    return {seqmodel::AdapterKind::none, lang};
}

seqmodel::Model::Sel Strategy::eval_sel(int lang, bool) const {
    return {seqmodel::AdapterKind::none, lang};
}

const std::vector<double>& Strategy::projection_diagnostics() const {
    static const std::vector<double> empty;
    return empty;
}

void Strategy::save_state(const std::filesystem::path& path) const {
    numkit::Checkpoint empty;
    numkit::save_checkpoint(empty, path);
}

void Strategy::load_state(const std::filesystem::path& path, const std::vector<TaskView>&,
                          const seqmodel::Model&) {
    numkit::load_checkpoint(path);
}

namespace {

/// Plain fine-tuning: the lower bound every other method is measured against.
class FineTuning final : public Strategy {
public:
    using Strategy::Strategy;

    TrainPlan prepare_task(seqmodel::Model&, const TaskView& task, const std::vector<TaskView>&,
                           std::uint64_t) override {
        TrainPlan plan;
        for (const auto* u : task.train_pool()) plan.items.emplace_back(u);
        plan.val = task.val_pool();
        return plan;
    }

    void finalize_task(seqmodel::Model&, const TaskView&, std::uint64_t) override {}
};

}  // namespace

std::unique_ptr<Strategy> make_strategy(const StrategyConfig& cfg) {
    switch (cfg.kind) {
        case StrategyKind::ft: return std::make_unique<FineTuning>(cfg);
        case StrategyKind::er: return std::make_unique<ExperienceReplay>(cfg);
        case StrategyKind::agem: return std::make_unique<AveragedGem>(cfg);
        case StrategyKind::der: return std::make_unique<DarkExperienceReplay>(cfg);
        case StrategyKind::pnn: return std::make_unique<ProgressiveColumns>(cfg);
        case StrategyKind::pb: return std::make_unique<Piggyback>(cfg);
        case StrategyKind::l2p: return std::make_unique<PromptTuning>(cfg);
        case StrategyKind::ewc: return std::make_unique<ElasticWeightConsolidation>(cfg);
        case StrategyKind::lwf: return std::make_unique<LearningWithoutForgetting>(cfg);
        case StrategyKind::mas: return std::make_unique<MemoryAwareSynapses>(cfg);
    }
    fail("make_strategy: unknown strategy kind");
}

}  // namespace clseq::strategies
