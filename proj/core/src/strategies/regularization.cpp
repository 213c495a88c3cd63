#include "clseq/strategies/regularization.hpp"

#include <cmath>

#include <json.hpp>

#include "clseq/ctcwer/ctc.hpp"
#include "clseq/error.hpp"

namespace clseq::strategies {

using numkit::Tape;
using numkit::TensorPtr;

void ImportanceMap::accumulate(const std::map<std::string, std::vector<double>>& fresh,
                               const numkit::ParamStore& params, double alpha) {
    std::map<std::string, numkit::TensorPtr> next_omega;
    for (const auto& [name, vals] : fresh) {
        auto param = params.at(name);
        auto merged = numkit::tensor(param->shape);
        check(vals.size() == merged->size(), "importance: sample sums shape drifted");
        const auto old_it = omega.find(name);
        if (old_it == omega.end()) {
            for (std::size_t i = 0; i < vals.size(); ++i)
                merged->v[i] = (1.0 - alpha) * vals[i];
        } else {
            const auto& old = *old_it->second;
            check(old.shape.size() == 2 && param->shape.size() == 2 &&
                      old.rows() == param->rows() && old.cols() <= param->cols(),
                  "importance: parameter '" + name + "' changed incompatibly");
            const std::size_t r = param->rows(), c = param->cols(), oc = old.cols();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) {
                    const double prev = j < oc ? old.v[i * oc + j] : 0.0;
                    merged->v[i * c + j] =
                        alpha * prev + (1.0 - alpha) * vals[i * c + j];
                }
        }
        next_omega[name] = merged;
    }
    omega = std::move(next_omega);
    anchor.clear();
    for (const auto& [name, _] : omega) anchor[name] = numkit::clone(params.at(name));
    for (auto& [name, t] : anchor) t->requires_grad = false;
    ++task_count;
}

numkit::TensorPtr ImportanceMap::penalty(Tape* tape, const numkit::ParamStore& params,
                                         double lambda) const {
    TensorPtr acc;
    for (const auto& [name, om] : omega) {
        if (!params.contains(name)) continue;
        auto param = params.at(name);
        TensorPtr view = param;
        if (param->shape != om->shape) {
            check(param->rows() == om->rows() && param->cols() > om->cols(),
                  "importance penalty: parameter '" + name + "' shape mismatch");
            view = numkit::slice_cols(tape, param, 0, om->cols());
        }
        auto diff = numkit::sub(tape, view, anchor.at(name));
        auto term = numkit::sum(tape, numkit::mul(tape, numkit::mul(tape, diff, diff), om));
        acc = acc ? numkit::add(tape, acc, term) : term;
    }
    check(acc != nullptr, "importance penalty: empty importance map");
    return numkit::scale(tape, acc, lambda / 2.0);
}

TrainPlan ImportanceStrategy::prepare_task(seqmodel::Model&, const TaskView& task,
                                           const std::vector<TaskView>& history,
                                           std::uint64_t) {
    check(task.is_base() == history.empty(), "importance: history out of sync with task index");
    TrainPlan plan;
    for (const auto* u : task.train_pool()) plan.items.emplace_back(u);
    plan.val = task.val_pool();
    return plan;
}

numkit::TensorPtr ImportanceStrategy::loss_hook(Tape* tape, TensorPtr base_loss, const Batch&,
                                                const seqmodel::Model& model) {
    if (map_.empty()) return base_loss;  // base stage: nothing to consolidate yet
    return numkit::add(tape, base_loss, map_.penalty(tape, model.params(), lambda()));
}

void ImportanceStrategy::update_importance(seqmodel::Model& model, const TaskView& task) {
    const auto pool = task.train_pool();
    check(!pool.empty(), "update_importance: empty task data");

    std::map<std::string, std::vector<double>> sums;
    for (const auto& e : model.params())
        if (!e.frozen) sums[e.name].assign(e.tensor->size(), 0.0);

    for (const auto* utt : pool) {
        model.params().zero_grads();
        sample_importance(model, *utt, sums);
    }
    model.params().zero_grads();

    const double inv = 1.0 / static_cast<double>(pool.size());
    for (auto& [name, vals] : sums)
        for (auto& v : vals) v *= inv;
    map_.accumulate(sums, model.params(), alpha());
}

void ImportanceStrategy::finalize_task(seqmodel::Model& model, const TaskView& task,
                                       std::uint64_t) {
    update_importance(model, task);
}

void ImportanceStrategy::save_state(const std::filesystem::path& path) const {
    numkit::Checkpoint ckpt;
    for (const auto& [name, t] : map_.omega)
        ckpt.entries.push_back({"omega." + name, t->shape, t->v, false});
    for (const auto& [name, t] : map_.anchor)
        ckpt.entries.push_back({"anchor." + name, t->shape, t->v, false});
    nlohmann::json meta;
    meta["task_count"] = map_.task_count;
    ckpt.meta_json = meta.dump();
    numkit::save_checkpoint(ckpt, path);
}

void ImportanceStrategy::load_state(const std::filesystem::path& path,
                                    const std::vector<TaskView>&, const seqmodel::Model&) {
    const auto ckpt = numkit::load_checkpoint(path);
    map_ = ImportanceMap{};
    map_.task_count = nlohmann::json::parse(ckpt.meta_json).at("task_count").get<int>();
    for (const auto& e : ckpt.entries) {
        auto t = numkit::tensor_of(e.shape, e.values);
        if (e.name.rfind("omega.", 0) == 0)
            map_.omega[e.name.substr(6)] = t;
        else if (e.name.rfind("anchor.", 0) == 0)
            map_.anchor[e.name.substr(7)] = t;
    }
}

void ElasticWeightConsolidation::sample_importance(
    seqmodel::Model& model, const synthlang::Utterance& utt,
    std::map<std::string, std::vector<double>>& sums) {
    Tape tape;
    const seqmodel::Model::Sel sel{seqmodel::AdapterKind::none, utt.lang};
    auto lp = numkit::log_softmax_rows(&tape, model.forward(&tape, utt.features, sel));
    tape.backward(ctcwer::ctc_loss(&tape, lp, model.to_local_targets(utt.tokens, sel)));
    for (const auto& e : model.params()) {
        if (e.frozen || e.tensor->g.empty()) continue;
        auto& acc = sums.at(e.name);
        for (std::size_t i = 0; i < e.tensor->g.size(); ++i)
            acc[i] += e.tensor->g[i] * e.tensor->g[i];
    }
}

void MemoryAwareSynapses::sample_importance(seqmodel::Model& model,
                                            const synthlang::Utterance& utt,
                                            std::map<std::string, std::vector<double>>& sums) {
    Tape tape;
    const seqmodel::Model::Sel sel{seqmodel::AdapterKind::none, utt.lang};
    auto logits = model.forward(&tape, utt.features, sel);
    tape.backward(numkit::sum(&tape, numkit::mul(&tape, logits, logits)));
    for (const auto& e : model.params()) {
        if (e.frozen || e.tensor->g.empty()) continue;
        auto& acc = sums.at(e.name);
        for (std::size_t i = 0; i < e.tensor->g.size(); ++i)
            acc[i] += std::abs(e.tensor->g[i]);
    }
}

TrainPlan LearningWithoutForgetting::prepare_task(seqmodel::Model& model, const TaskView& task,
                                                  const std::vector<TaskView>& history,
                                                  std::uint64_t) {
    if (task.is_base()) {
        teacher_.reset();
    } else {
        check(!history.empty(), "lwf: incremental task with empty history");
        // Frozen copy of the model as trained up to the previous task; taken
        // before the new language is registered.
        teacher_.emplace(model.clone());
    }
    current_lang_ = task.primary_lang();
    is_base_stage_ = task.is_base();
    TrainPlan plan;
    for (const auto* u : task.train_pool()) plan.items.emplace_back(u);
    plan.val = task.val_pool();
    return plan;
}

numkit::TensorPtr LearningWithoutForgetting::loss_hook(Tape* tape, TensorPtr base_loss,
                                                       const Batch& batch,
                                                       const seqmodel::Model& model) {
    if (is_base_stage_) return base_loss;
    check(teacher_.has_value(), "lwf: loss hook called without a teacher snapshot");

    const double inv_temp = 1.0 / cfg_.lwf_temperature;
    const auto student_heads = model.previous_heads(current_lang_);
    const auto teacher_heads = teacher_->previous_heads(current_lang_);
    check(student_heads.size() == teacher_heads.size(), "lwf: teacher/student heads diverged");

    TensorPtr kd;
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
        auto teacher_hidden =
            teacher_->encode(nullptr, batch.items[i]->utt->features,
                             {seqmodel::AdapterKind::none, -1});
        for (std::size_t h = 0; h < student_heads.size(); ++h) {
            auto t_logits = numkit::add_rowwise(
                nullptr, numkit::matmul(nullptr, teacher_hidden, teacher_heads[h]->w),
                teacher_heads[h]->b);
            auto t_probs = numkit::softmax_rows(
                nullptr, numkit::scale(nullptr, t_logits, inv_temp));

            auto s_logits = numkit::add_rowwise(
                tape, numkit::matmul(tape, batch.hidden[i], student_heads[h]->w),
                student_heads[h]->b);
            if (s_logits->cols() > t_logits->cols())
                s_logits = numkit::slice_cols(tape, s_logits, 0, t_logits->cols());
            auto s_log_probs =
                numkit::log_softmax_rows(tape, numkit::scale(tape, s_logits, inv_temp));

            const double frames = static_cast<double>(t_logits->rows());
            auto ce = numkit::scale(tape, numkit::sum(tape, numkit::mul(tape, s_log_probs, t_probs)),
                                    -1.0 / frames);
            kd = kd ? numkit::add(tape, kd, ce) : ce;
        }
    }
    const double denom = static_cast<double>(batch.items.size() * student_heads.size());
    kd = numkit::scale(tape, kd, cfg_.lwf_lambda / denom);
    return numkit::add(tape, base_loss, kd);
}

void LearningWithoutForgetting::finalize_task(seqmodel::Model& model, const TaskView&,
                                              std::uint64_t) {
    teacher_.emplace(model.clone());
}

void LearningWithoutForgetting::save_state(const std::filesystem::path& path) const {
    numkit::Checkpoint ckpt;
    nlohmann::json meta;
    meta["current_lang"] = current_lang_;
    meta["has_teacher"] = teacher_.has_value();
    if (teacher_.has_value()) {
        auto inner = teacher_->snapshot_all();
        for (auto& e : inner.entries) {
            e.name = "teacher." + e.name;
            ckpt.entries.push_back(std::move(e));
        }
        meta["teacher_meta"] = inner.meta_json;
    }
    ckpt.meta_json = meta.dump();
    numkit::save_checkpoint(ckpt, path);
}

void LearningWithoutForgetting::load_state(const std::filesystem::path& path,
                                           const std::vector<TaskView>&,
                                           const seqmodel::Model& model) {
    const auto ckpt = numkit::load_checkpoint(path);
    const auto meta = nlohmann::json::parse(ckpt.meta_json);
    current_lang_ = meta.at("current_lang").get<int>();
    teacher_.reset();
    if (!meta.at("has_teacher").get<bool>()) return;
    numkit::Checkpoint inner;
    inner.meta_json = meta.at("teacher_meta").get<std::string>();
    for (const auto& e : ckpt.entries) {
        if (e.name.rfind("teacher.", 0) != 0) continue;
        auto copy = e;
        copy.name = e.name.substr(8);
        inner.entries.push_back(std::move(copy));
    }
    teacher_.emplace(seqmodel::Model::skeleton(model.config()));
    teacher_->restore_all(inner);
}

}  // namespace clseq::strategies
