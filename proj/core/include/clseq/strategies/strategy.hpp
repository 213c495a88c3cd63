#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "clseq/seqmodel/model.hpp"

namespace clseq::strategies {

enum class StrategyKind { ft, er, agem, der, pnn, pb, l2p, ewc, lwf, mas };

std::string strategy_name(StrategyKind kind);
StrategyKind strategy_from(const std::string& name);
bool is_architecture(StrategyKind kind);

/// Hyperparameters for every strategy, with their standard defaults.
struct StrategyConfig {
    StrategyKind kind = StrategyKind::ft;
    double replay_ratio = 0.10;
    double der_alpha = 1.0;
    double ewc_lambda = 5.0;
    double ewc_alpha = 0.5;
    double lwf_temperature = 2.0;
    double lwf_lambda = 10.0;
    double mas_lambda = 1.0;
    double mas_alpha = 0.5;
    double pb_init = 0.01;
    double pb_threshold = 0.005;
};

/// One task in protocol order. The base task (index 0) spans every base
/// language; incremental tasks hold exactly one.
struct TaskView {
    int task_index = 0;
    std::vector<const synthlang::TaskData*> members;

    std::vector<const synthlang::Utterance*> train_pool() const;
    std::vector<const synthlang::Utterance*> val_pool() const;
    int primary_lang() const;
    bool is_base() const { return task_index == 0; }
};

struct TrainItem {
    const synthlang::Utterance* utt = nullptr;
    bool replayed = false;
    /// DER: teacher logits captured when the sample entered the buffer.
    const std::vector<double>* stored_logits = nullptr;
    numkit::Shape stored_shape;

    TrainItem() = default;
    explicit TrainItem(const synthlang::Utterance* u, bool replay = false)
        : utt(u), replayed(replay) {}
    TrainItem(const synthlang::Utterance* u, bool replay, const std::vector<double>* logits,
              numkit::Shape shape)
        : utt(u), replayed(replay), stored_logits(logits), stored_shape(std::move(shape)) {}
};

struct TrainPlan {
    std::vector<TrainItem> items;
    std::vector<const synthlang::Utterance*> val;
};

/// Per-item tensors the harness computed for the current batch, so loss
/// hooks can build their extra terms without re-running the encoder.
struct Batch {
    std::vector<const TrainItem*> items;
    std::vector<numkit::TensorPtr> hidden;
    std::vector<numkit::TensorPtr> logits;
};

struct BufferEntry {
    const synthlang::Utterance* utt = nullptr;
    int source_task = -1;
    std::vector<double> stored_logits;
    numkit::Shape stored_shape;
};

class ReplayBuffer {
public:
    void retain(int task_index, std::vector<BufferEntry> entries);
    bool has_task(int task_index) const { return per_task_.count(task_index) != 0; }
    const std::vector<BufferEntry>& task_entries(int task_index) const;
    std::vector<const BufferEntry*> all() const;
    std::size_t size() const;
    const std::map<int, std::vector<BufferEntry>>& by_task() const { return per_task_; }
    std::map<int, std::vector<BufferEntry>>& by_task() { return per_task_; }

private:
    std::map<int, std::vector<BufferEntry>> per_task_;
};

/// Projects g onto the half-space where it does not conflict with g_ref:
/// if g.g_ref < 0, g <- g - (g.g_ref / ||g_ref||^2) g_ref. A zero reference
/// gradient leaves g unchanged. Returns the post-projection dot product.
double agem_project(std::span<const double> g_ref, std::span<double> g);

/// Mean CTC loss of a batch under the given per-utterance selection.
numkit::TensorPtr batch_ctc_loss(numkit::Tape* tape, const seqmodel::Model& model,
                                 std::span<const synthlang::Utterance* const> utts,
                                 const std::vector<seqmodel::Model::Sel>& sels);

/// Lifecycle shared by all ten strategies:
/// prepare_task -> per-batch loss/gradient hooks -> finalize_task.
class Strategy {
public:
    explicit Strategy(StrategyConfig cfg) : cfg_(cfg) {}
    virtual ~Strategy() = default;

    StrategyKind kind() const { return cfg_.kind; }
    const StrategyConfig& config() const { return cfg_; }

    virtual TrainPlan prepare_task(seqmodel::Model& model, const TaskView& task,
                                   const std::vector<TaskView>& history,
                                   std::uint64_t run_seed) = 0;

    virtual numkit::TensorPtr loss_hook(numkit::Tape* tape, numkit::TensorPtr base_loss,
                                        const Batch& batch, const seqmodel::Model& model);

    /// Called after backward and before clipping; A-GEM overrides.
    virtual void grad_hook(const seqmodel::Model& model, const numkit::ParamStore& train_params,
                           std::size_t batch_size, numkit::Rng& rng);

    /// EWC/MAS importance refresh; an error for every other strategy.
    virtual void update_importance(seqmodel::Model& model, const TaskView& task);

    virtual void finalize_task(seqmodel::Model& model, const TaskView& task,
                               std::uint64_t run_seed) = 0;

    /// Parameters the optimizer may update during this task.
    virtual void collect_trainable(const seqmodel::Model& model, const TaskView& task,
                                   numkit::ParamStore& out) const;

    /// Whether replayed items enter the transcription loss. Distillation-only
    /// replay (DER) turns this off.
    virtual bool ctc_on_replayed() const { return true; }

    /// Selection used to run a training item of language `lang`.
    virtual seqmodel::Model::Sel train_sel(const TaskView& task, int lang) const;
    /// Selection used to evaluate language `lang` after training.
    virtual seqmodel::Model::Sel eval_sel(int lang, bool is_base_lang) const;

    /// Post-projection dot products, one per A-GEM step; empty otherwise.
    virtual const std::vector<double>& projection_diagnostics() const;

    /// State persistence: JSON index plus binary tensor blobs, so an
    /// interrupted experiment resumes deterministically. Loading rebinds
    /// buffer references against the regenerated tasks.
    virtual void save_state(const std::filesystem::path& path) const;
    virtual void load_state(const std::filesystem::path& path,
                            const std::vector<TaskView>& tasks,
                            const seqmodel::Model& model);

protected:
    StrategyConfig cfg_;
};

std::unique_ptr<Strategy> make_strategy(const StrategyConfig& cfg);

}  // namespace clseq::strategies
