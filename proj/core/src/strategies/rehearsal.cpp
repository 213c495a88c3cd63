#include "clseq/strategies/rehearsal.hpp"

#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "clseq/error.hpp"

namespace clseq::strategies {

using numkit::Rng;
using numkit::mix_seed;

namespace {

std::uint64_t buffer_seed(std::uint64_t run_seed, int task_index) {
    return mix_seed(run_seed, "buffer", static_cast<std::uint64_t>(task_index));
}

}  // namespace

std::vector<BufferEntry> ExperienceReplay::draw_retained(const TaskView& task,
                                                         std::uint64_t run_seed) const {
    const auto pool = task.train_pool();
    const auto keep = static_cast<std::size_t>(
        std::llround(cfg_.replay_ratio * static_cast<double>(pool.size())));
    Rng rng(buffer_seed(run_seed, task.task_index));
    std::vector<BufferEntry> entries;
    entries.reserve(keep);
    for (std::size_t idx : rng.sample_without_replacement(pool.size(), keep))
        entries.push_back({pool[idx], task.task_index, {}, {}});
    return entries;
}

TrainPlan ExperienceReplay::prepare_task(seqmodel::Model&, const TaskView& task,
                                         const std::vector<TaskView>& history,
                                         std::uint64_t run_seed) {
    check(cfg_.replay_ratio > 0.0 && cfg_.replay_ratio <= 1.0,
          "er: replay_ratio must be in (0, 1]");
    TrainPlan plan;
    for (const auto* u : task.train_pool()) plan.items.emplace_back(u);
    for (const auto& past : history) {
        check(buffer_.has_task(past.task_index),
              cat("er: task ", past.task_index, " was never finalized into the buffer"));
        for (const auto& e : buffer_.task_entries(past.task_index))
            plan.items.emplace_back(e.utt, true);
    }
    plan.val = task.val_pool();
    // Validation mirrors the mixing so plateau decisions see replayed tasks.
    for (const auto& past : history) {
        const auto pool = past.val_pool();
        const auto keep = static_cast<std::size_t>(
            std::llround(cfg_.replay_ratio * static_cast<double>(pool.size())));
        Rng rng(mix_seed(mix_seed(run_seed, "val_replay", task.task_index), "task",
                         static_cast<std::uint64_t>(past.task_index)));
        for (std::size_t idx : rng.sample_without_replacement(pool.size(), keep))
            plan.val.push_back(pool[idx]);
    }
    return plan;
}

void ExperienceReplay::finalize_task(seqmodel::Model&, const TaskView& task,
                                     std::uint64_t run_seed) {
    buffer_.retain(task.task_index, draw_retained(task, run_seed));
}

void ExperienceReplay::save_state(const std::filesystem::path& path) const {
    numkit::Checkpoint ckpt;
    nlohmann::json meta;
    auto tasks = nlohmann::json::object();
    for (const auto& [task_index, entries] : buffer_.by_task()) {
        auto ids = nlohmann::json::array();
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            ids.push_back(e.utt->id);
            if (!e.stored_logits.empty())
                ckpt.entries.push_back({cat("logits.", task_index, ".", i), e.stored_shape,
                                        e.stored_logits, false});
        }
        tasks[std::to_string(task_index)] = ids;
    }
    meta["buffer"] = tasks;
    ckpt.meta_json = meta.dump();
    numkit::save_checkpoint(ckpt, path);
}

void ExperienceReplay::load_state(const std::filesystem::path& path,
                                  const std::vector<TaskView>& tasks,
                                  const seqmodel::Model&) {
    const auto ckpt = numkit::load_checkpoint(path);
    const auto meta = nlohmann::json::parse(ckpt.meta_json);

    std::unordered_map<std::string, const synthlang::Utterance*> by_id;
    std::unordered_map<std::string, int> task_of;
    for (const auto& t : tasks)
        for (const auto* u : t.train_pool()) {
            by_id[u->id] = u;
            task_of[u->id] = t.task_index;
        }

    buffer_ = ReplayBuffer{};
    for (const auto& [key, ids] : meta.at("buffer").items()) {
        const int task_index = std::stoi(key);
        std::vector<BufferEntry> entries;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto id = ids[i].get<std::string>();
            auto it = by_id.find(id);
            check(it != by_id.end(), "er: state references unknown utterance '" + id + "'");
            check(task_of[id] == task_index,
                  "er: utterance '" + id + "' belongs to a different task than recorded");
            BufferEntry e{it->second, task_index, {}, {}};
            if (const auto* stored = ckpt.find(cat("logits.", task_index, ".", i))) {
                e.stored_logits = stored->values;
                e.stored_shape = stored->shape;
            }
            entries.push_back(std::move(e));
        }
        buffer_.retain(task_index, std::move(entries));
    }
}

TrainPlan AveragedGem::prepare_task(seqmodel::Model&, const TaskView& task,
                                    const std::vector<TaskView>& history,
                                    std::uint64_t) {
    TrainPlan plan;
    for (const auto* u : task.train_pool()) plan.items.emplace_back(u);
    plan.val = task.val_pool();
    for (const auto& past : history)
        check(buffer_.has_task(past.task_index),
              cat("agem: task ", past.task_index, " was never finalized into the buffer"));
    dots_.clear();
    return plan;
}

void AveragedGem::grad_hook(const seqmodel::Model& model,
                            const numkit::ParamStore& train_params, std::size_t batch_size,
                            Rng& rng) {
    const auto entries = buffer_.all();
    if (entries.empty()) return;

    std::vector<double> g_cur;
    for (const auto& e : train_params) {
        e.tensor->ensure_grad();
        g_cur.insert(g_cur.end(), e.tensor->g.begin(), e.tensor->g.end());
    }
    train_params.zero_grads();

    // Reference gradient: mean task-loss gradient over a fresh replay batch.
    std::vector<const synthlang::Utterance*> replay;
    std::vector<seqmodel::Model::Sel> sels;
    for (std::size_t i = 0; i < batch_size; ++i) {
        const auto* e = entries[rng.below(entries.size())];
        replay.push_back(e->utt);
        sels.push_back({seqmodel::AdapterKind::none, e->utt->lang});
    }
    numkit::Tape tape;
    tape.backward(batch_ctc_loss(&tape, model, replay, sels));

    std::vector<double> g_ref;
    for (const auto& e : train_params) {
        e.tensor->ensure_grad();  // parameters the replay batch never touches
        g_ref.insert(g_ref.end(), e.tensor->g.begin(), e.tensor->g.end());
    }

    dots_.push_back(agem_project(g_ref, g_cur));

    std::size_t off = 0;
    for (const auto& e : train_params) {
        for (std::size_t i = 0; i < e.tensor->g.size(); ++i)
            e.tensor->g[i] = g_cur[off + i];
        off += e.tensor->g.size();
    }
}

TrainPlan DarkExperienceReplay::prepare_task(seqmodel::Model&, const TaskView& task,
                                             const std::vector<TaskView>& history,
                                             std::uint64_t) {
    TrainPlan plan;
    for (const auto* u : task.train_pool()) plan.items.emplace_back(u);
    plan.val = task.val_pool();
    for (const auto& past : history) {
        check(buffer_.has_task(past.task_index),
              cat("der: task ", past.task_index, " was never finalized into the buffer"));
        for (const auto& e : buffer_.task_entries(past.task_index)) {
            check(!e.stored_logits.empty(),
                  cat("der: no teacher logits recorded for '", e.utt->id, "'"));
            plan.items.emplace_back(e.utt, true, &e.stored_logits, e.stored_shape);
        }
    }
    return plan;
}

numkit::TensorPtr DarkExperienceReplay::loss_hook(numkit::Tape* tape,
                                                  numkit::TensorPtr base_loss,
                                                  const Batch& batch,
                                                  const seqmodel::Model&) {
    numkit::TensorPtr distill;
    std::size_t n_replayed = 0;
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
        const auto* item = batch.items[i];
        if (!item->replayed) continue;
        check(item->stored_logits != nullptr,
              "der: replayed sample without a teacher snapshot");
        ++n_replayed;
        auto stored = numkit::tensor_of(item->stored_shape, *item->stored_logits);
        auto student = batch.logits[i];
        // Compare over the common span; the stored width never exceeds the
        // student's token columns.
        const std::size_t rows = std::min(student->rows(), stored->rows());
        const std::size_t cols = stored->cols();
        auto student_view = numkit::slice_cols(
            tape, numkit::slice_rows(tape, student, 0, rows), 0, cols);
        auto stored_view = stored->rows() == rows
                               ? stored
                               : numkit::slice_rows(nullptr, stored, 0, rows);
        auto diff = numkit::sub(tape, student_view, stored_view);
        auto term = numkit::mean(tape, numkit::mul(tape, diff, diff));
        distill = distill ? numkit::add(tape, distill, term) : term;
    }
    if (n_replayed == 0) return base_loss;
    distill = numkit::scale(tape, distill,
                            cfg_.der_alpha / static_cast<double>(n_replayed));
    return numkit::add(tape, base_loss, distill);
}

void DarkExperienceReplay::finalize_task(seqmodel::Model& model, const TaskView& task,
                                         std::uint64_t run_seed) {
    auto entries = draw_retained(task, run_seed);
    for (auto& e : entries) {
        const seqmodel::Model::Sel sel{seqmodel::AdapterKind::none, e.utt->lang};
        auto logits = model.forward(nullptr, e.utt->features, sel);
        // Keep only the decodable token columns; later language columns would
        // shift the comparison span.
        auto view = numkit::slice_cols(nullptr, logits, 0, model.decode_cols(sel));
        e.stored_logits = view->v;
        e.stored_shape = view->shape;
    }
    buffer_.retain(task.task_index, std::move(entries));
}

}  // namespace clseq::strategies
