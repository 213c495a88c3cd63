#include "clseq/strategies/architecture.hpp"

#include "clseq/error.hpp"

namespace clseq::strategies {

using numkit::Rng;
using numkit::mix_seed;

TrainPlan ArchitectureStrategy::prepare_task(seqmodel::Model& model, const TaskView& task,
                                             const std::vector<TaskView>&,
                                             std::uint64_t run_seed) {
    if (!task.is_base()) {
        Rng rng(mix_seed(run_seed, "adapter", static_cast<std::uint64_t>(task.primary_lang())));
        create_adapter(model, task, rng);
    }
    TrainPlan plan;
    for (const auto* u : task.train_pool()) plan.items.emplace_back(u);
    plan.val = task.val_pool();
    return plan;
}

void ArchitectureStrategy::finalize_task(seqmodel::Model& model, const TaskView& task,
                                         std::uint64_t) {
    if (!task.is_base()) freeze_adapter(model, task.primary_lang());
}

void ArchitectureStrategy::collect_trainable(const seqmodel::Model& model, const TaskView& task,
                                             numkit::ParamStore& out) const {
    if (task.is_base()) {
        Strategy::collect_trainable(model, task, out);
        return;
    }
    adapter_params(model, task.primary_lang(), out);
}

seqmodel::Model::Sel ArchitectureStrategy::train_sel(const TaskView& task, int lang) const {
    if (task.is_base()) return {seqmodel::AdapterKind::none, lang};
    return {adapter_kind(), task.primary_lang()};
}

seqmodel::Model::Sel ArchitectureStrategy::eval_sel(int lang, bool is_base_lang) const {
    if (is_base_lang) return {seqmodel::AdapterKind::none, lang};
    return {adapter_kind(), lang};
}

namespace {

void add_store(const numkit::ParamStore& src, const std::string& prefix,
               numkit::ParamStore& out) {
    for (const auto& e : src)
        if (!e.frozen) out.add(prefix + e.name, e.tensor);
}

void freeze_store(numkit::ParamStore& store) {
    for (const auto& e : store) store.set_frozen(e.name, true);
}

}  // namespace

void ProgressiveColumns::create_adapter(seqmodel::Model& model, const TaskView& task,
                                        Rng& rng) {
    model.create_pnn_column(task.primary_lang(), task.members.front()->spec, rng);
}

void ProgressiveColumns::adapter_params(const seqmodel::Model& model, int lang,
                                        numkit::ParamStore& out) const {
    add_store(model.adapters().pnn(lang).params, "", out);
}

void ProgressiveColumns::freeze_adapter(seqmodel::Model& model, int lang) const {
    freeze_store(model.adapters().pnn(lang).params);
}

void Piggyback::create_adapter(seqmodel::Model& model, const TaskView& task, Rng& rng) {
    model.create_piggyback(task.primary_lang(), task.members.front()->spec, cfg_.pb_init,
                           cfg_.pb_threshold, rng);
}

void Piggyback::adapter_params(const seqmodel::Model& model, int lang,
                               numkit::ParamStore& out) const {
    const auto& pb = model.adapters().pb(lang);
    add_store(pb.real_weights, "", out);
    if (pb.has_task_head) add_store(pb.head_params, "", out);
}

void Piggyback::freeze_adapter(seqmodel::Model& model, int lang) const {
    auto& pb = model.adapters().pb(lang);
    freeze_store(pb.real_weights);
    if (pb.has_task_head) freeze_store(pb.head_params);
}

void PromptTuning::create_adapter(seqmodel::Model& model, const TaskView& task, Rng& rng) {
    model.create_prompt(task.primary_lang(), task.members.front()->spec, rng);
}

void PromptTuning::adapter_params(const seqmodel::Model& model, int lang,
                                  numkit::ParamStore& out) const {
    add_store(model.adapters().l2p(lang).params, "", out);
}

void PromptTuning::freeze_adapter(seqmodel::Model& model, int lang) const {
    freeze_store(model.adapters().l2p(lang).params);
}

}  // namespace clseq::strategies
