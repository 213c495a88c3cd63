#pragma once

#include <optional>

#include "clseq/strategies/strategy.hpp"

namespace clseq::strategies {

/// Per-parameter nonnegative importance plus the anchor values the quadratic
/// penalty pulls toward. Accumulated across tasks as an exponential moving
/// average so it stays bounded.
struct ImportanceMap {
    std::map<std::string, numkit::TensorPtr> omega;
    std::map<std::string, numkit::TensorPtr> anchor;
    int task_count = 0;

    bool empty() const { return omega.empty(); }

    /// omega <- alpha * omega_old + (1 - alpha) * fresh; anchor <- current.
    /// Parameters that grew since the last task keep zero importance on the
    /// new trailing columns.
    void accumulate(const std::map<std::string, std::vector<double>>& fresh,
                    const numkit::ParamStore& params, double alpha);

    /// (lambda / 2) * sum_i omega_i (theta_i - anchor_i)^2, on the tape.
    numkit::TensorPtr penalty(numkit::Tape* tape, const numkit::ParamStore& params,
                              double lambda) const;
};

class ImportanceStrategy : public Strategy {
public:
    using Strategy::Strategy;

    TrainPlan prepare_task(seqmodel::Model& model, const TaskView& task,
                           const std::vector<TaskView>& history, std::uint64_t run_seed) override;
    numkit::TensorPtr loss_hook(numkit::Tape* tape, numkit::TensorPtr base_loss,
                                const Batch& batch, const seqmodel::Model& model) override;
    void update_importance(seqmodel::Model& model, const TaskView& task) override;
    void finalize_task(seqmodel::Model& model, const TaskView& task,
                       std::uint64_t run_seed) override;

    const ImportanceMap& importance() const { return map_; }
    void save_state(const std::filesystem::path& path) const override;
    void load_state(const std::filesystem::path& path, const std::vector<TaskView>& tasks,
                    const seqmodel::Model& model) override;

protected:
    ImportanceMap map_;

    virtual double lambda() const = 0;
    virtual double alpha() const = 0;
    /// Accumulates this sample's contribution into per-parameter sums.
    virtual void sample_importance(seqmodel::Model& model, const synthlang::Utterance& utt,
                                   std::map<std::string, std::vector<double>>& sums) = 0;
};

/// Importance = diagonal Fisher information: the mean squared gradient of the
/// task loss, estimated with the true transcripts.
class ElasticWeightConsolidation final : public ImportanceStrategy {
public:
    using ImportanceStrategy::ImportanceStrategy;

private:
    double lambda() const override { return cfg_.ewc_lambda; }
    double alpha() const override { return cfg_.ewc_alpha; }
    void sample_importance(seqmodel::Model& model, const synthlang::Utterance& utt,
                           std::map<std::string, std::vector<double>>& sums) override;
};

/// Importance = mean absolute gradient of the squared L2 norm of the model
/// output, so it needs no labels.
class MemoryAwareSynapses final : public ImportanceStrategy {
public:
    using ImportanceStrategy::ImportanceStrategy;

private:
    double lambda() const override { return cfg_.mas_lambda; }
    double alpha() const override { return cfg_.mas_alpha; }
    void sample_importance(seqmodel::Model& model, const synthlang::Utterance& utt,
                           std::map<std::string, std::vector<double>>& sums) override;
};

/// Distills the previous model's per-frame output distributions into the
/// student on current-task inputs, temperature-smoothed.
class LearningWithoutForgetting final : public Strategy {
public:
    using Strategy::Strategy;

    TrainPlan prepare_task(seqmodel::Model& model, const TaskView& task,
                           const std::vector<TaskView>& history, std::uint64_t run_seed) override;
    numkit::TensorPtr loss_hook(numkit::Tape* tape, numkit::TensorPtr base_loss,
                                const Batch& batch, const seqmodel::Model& model) override;
    void finalize_task(seqmodel::Model& model, const TaskView& task,
                       std::uint64_t run_seed) override;

    bool has_teacher() const { return teacher_.has_value(); }
    void save_state(const std::filesystem::path& path) const override;
    void load_state(const std::filesystem::path& path, const std::vector<TaskView>& tasks,
                    const seqmodel::Model& model) override;

private:
    std::optional<seqmodel::Model> teacher_;
    int current_lang_ = -1;
    bool is_base_stage_ = true;
};

}  // namespace clseq::strategies
