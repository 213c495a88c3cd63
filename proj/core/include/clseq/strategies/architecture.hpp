#pragma once

#include "clseq/strategies/strategy.hpp"

namespace clseq::strategies {

/// Shared lifecycle for the adapter-based methods: the base model trains once
/// on the base task, every later task trains only its own adapter, and the
/// base parameters are never written again.
class ArchitectureStrategy : public Strategy {
public:
    using Strategy::Strategy;

    TrainPlan prepare_task(seqmodel::Model& model, const TaskView& task,
                           const std::vector<TaskView>& history, std::uint64_t run_seed) override;
    void finalize_task(seqmodel::Model& model, const TaskView& task,
                       std::uint64_t run_seed) override;
    void collect_trainable(const seqmodel::Model& model, const TaskView& task,
                           numkit::ParamStore& out) const override;
    seqmodel::Model::Sel train_sel(const TaskView& task, int lang) const override;
    seqmodel::Model::Sel eval_sel(int lang, bool is_base_lang) const override;

protected:
    virtual seqmodel::AdapterKind adapter_kind() const = 0;
    virtual void create_adapter(seqmodel::Model& model, const TaskView& task,
                                numkit::Rng& rng) = 0;
    virtual void adapter_params(const seqmodel::Model& model, int lang,
                                numkit::ParamStore& out) const = 0;
    virtual void freeze_adapter(seqmodel::Model& model, int lang) const = 0;
};

class ProgressiveColumns final : public ArchitectureStrategy {
public:
    using ArchitectureStrategy::ArchitectureStrategy;

private:
    seqmodel::AdapterKind adapter_kind() const override { return seqmodel::AdapterKind::pnn; }
    void create_adapter(seqmodel::Model& model, const TaskView& task,
                        numkit::Rng& rng) override;
    void adapter_params(const seqmodel::Model& model, int lang,
                        numkit::ParamStore& out) const override;
    void freeze_adapter(seqmodel::Model& model, int lang) const override;
};

class Piggyback final : public ArchitectureStrategy {
public:
    using ArchitectureStrategy::ArchitectureStrategy;

private:
    seqmodel::AdapterKind adapter_kind() const override { return seqmodel::AdapterKind::pb; }
    void create_adapter(seqmodel::Model& model, const TaskView& task,
                        numkit::Rng& rng) override;
    void adapter_params(const seqmodel::Model& model, int lang,
                        numkit::ParamStore& out) const override;
    void freeze_adapter(seqmodel::Model& model, int lang) const override;
};

class PromptTuning final : public ArchitectureStrategy {
public:
    using ArchitectureStrategy::ArchitectureStrategy;

private:
    seqmodel::AdapterKind adapter_kind() const override { return seqmodel::AdapterKind::l2p; }
    void create_adapter(seqmodel::Model& model, const TaskView& task,
                        numkit::Rng& rng) override;
    void adapter_params(const seqmodel::Model& model, int lang,
                        numkit::ParamStore& out) const override;
    void freeze_adapter(seqmodel::Model& model, int lang) const override;
};

}  // namespace clseq::strategies
