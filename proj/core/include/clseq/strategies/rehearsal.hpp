#pragma once

#include "clseq/strategies/strategy.hpp"

namespace clseq::strategies {

/// Dataset-level mixing: before each task, the training set becomes the
/// current data plus the retained fraction of every previous task.
class ExperienceReplay : public Strategy {
public:
    using Strategy::Strategy;

    TrainPlan prepare_task(seqmodel::Model& model, const TaskView& task,
                           const std::vector<TaskView>& history, std::uint64_t run_seed) override;
    void finalize_task(seqmodel::Model& model, const TaskView& task,
                       std::uint64_t run_seed) override;

    const ReplayBuffer& buffer() const { return buffer_; }
    void save_state(const std::filesystem::path& path) const override;
    void load_state(const std::filesystem::path& path, const std::vector<TaskView>& tasks,
                    const seqmodel::Model& model) override;

protected:
    ReplayBuffer buffer_;

    std::vector<BufferEntry> draw_retained(const TaskView& task, std::uint64_t run_seed) const;
};

/// Keeps the replay data out of the training set; instead every step's
/// gradient is projected so it cannot conflict with the mean gradient of a
/// freshly sampled replay batch.
class AveragedGem final : public ExperienceReplay {
public:
    using ExperienceReplay::ExperienceReplay;

    TrainPlan prepare_task(seqmodel::Model& model, const TaskView& task,
                           const std::vector<TaskView>& history, std::uint64_t run_seed) override;
    void grad_hook(const seqmodel::Model& model, const numkit::ParamStore& train_params,
                   std::size_t batch_size, numkit::Rng& rng) override;
    const std::vector<double>& projection_diagnostics() const override { return dots_; }

private:
    std::vector<double> dots_;
};

/// Replay plus logit distillation: replayed samples contribute only the
/// squared distance between the student's logits and the logits recorded when
/// the sample entered the buffer.
class DarkExperienceReplay final : public ExperienceReplay {
public:
    using ExperienceReplay::ExperienceReplay;

    TrainPlan prepare_task(seqmodel::Model& model, const TaskView& task,
                           const std::vector<TaskView>& history, std::uint64_t run_seed) override;
    numkit::TensorPtr loss_hook(numkit::Tape* tape, numkit::TensorPtr base_loss,
                                const Batch& batch, const seqmodel::Model& model) override;
    void finalize_task(seqmodel::Model& model, const TaskView& task,
                       std::uint64_t run_seed) override;
    bool ctc_on_replayed() const override { return false; }
};

}  // namespace clseq::strategies
