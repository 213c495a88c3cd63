#include "clseq/clbench/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "clseq/ctcwer/ctc.hpp"
#include "clseq/ctcwer/decode.hpp"
#include "clseq/error.hpp"
#include "clseq/numkit/optim.hpp"

namespace clseq::clbench {

using numkit::Rng;
using numkit::mix_seed;
using seqmodel::Model;
using strategies::Strategy;
using strategies::TaskView;
using synthlang::TaskData;
using synthlang::Utterance;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::uint64_t stage_seed(const ExperimentConfig& cfg, const TaskView& task) {
    if (task.is_base()) return mix_seed(cfg.seed, "stage.base");
    // Scoped by language, not by position, so a solo reference run replays
    // the exact stream of the main run's matching stage.
    return mix_seed(cfg.seed, "stage.lang", static_cast<std::uint64_t>(task.primary_lang()));
}

void set_trainable_exactly(Model& model, const numkit::ParamStore& view) {
    std::unordered_set<const numkit::Tensor*> wanted;
    for (const auto& e : view) wanted.insert(e.tensor.get());
    auto apply = [&](const numkit::ParamStore& store) {
        for (const auto& e : store)
            e.tensor->requires_grad = wanted.count(e.tensor.get()) != 0;
    };
    apply(model.params());
    for (auto& [lang, a] : model.adapters().all_pnn()) apply(a.params);
    for (auto& [lang, a] : model.adapters().all_pb()) {
        apply(a.real_weights);
        if (a.has_task_head) apply(a.head_params);
    }
    for (auto& [lang, a] : model.adapters().all_l2p()) apply(a.params);
}

double corpus_wer(const Model& model, std::span<const Utterance* const> utts,
                  const std::function<Model::Sel(const Utterance&)>& sel_of,
                  const std::map<int, const synthlang::TaskSpec*>& specs) {
    check(!utts.empty(), "corpus_wer: empty evaluation set");
    ctcwer::WerScore total;
    for (const auto* utt : utts) {
        const auto sel = sel_of(*utt);
        auto logits = model.forward(nullptr, utt->features, sel);
        const auto local = ctcwer::greedy_decode(*logits, model.decode_cols(sel));
        const ctcwer::TokenSeq hyp{model.to_global(local, sel), utt->lang};
        const auto* spec = specs.at(utt->lang);
        total += ctcwer::score(utt->tokens, hyp, spec->granularity, spec->scoring());
    }
    return total.rate();
}

struct StageStats {
    double final_val_wer = 0.0;
};

StageStats train_stage(const ExperimentConfig& cfg, Model& model, Strategy& strategy,
                       const TaskView& task, const std::vector<TaskView>& history,
                       const std::map<int, const synthlang::TaskSpec*>& specs,
                       const std::string& label) {
    auto plan = strategy.prepare_task(model, task, history, cfg.seed);
    if (!strategies::is_architecture(strategy.kind()) && !task.is_base() &&
        !model.language_registered(task.primary_lang())) {
        Rng rng(mix_seed(cfg.seed, "lang_token",
                         static_cast<std::uint64_t>(task.primary_lang())));
        model.register_language(task.members.front()->spec, rng);
    }

    numkit::ParamStore train_params;
    strategy.collect_trainable(model, task, train_params);
    check(train_params.size() > 0, "train_stage: nothing to train at stage " + label);
    set_trainable_exactly(model, train_params);
    train_params.zero_grads();

    numkit::AdamWConfig opt_cfg;
    opt_cfg.lr = cfg.learning_rate;
    opt_cfg.weight_decay = cfg.weight_decay;
    numkit::AdamW optim(opt_cfg);
    Rng rng(stage_seed(cfg, task));

    const int epochs = task.is_base() ? cfg.base_epochs : cfg.task_epochs;
    StageStats stats;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(plan.items);
        for (std::size_t start = 0; start < plan.items.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(plan.items.size(), start + static_cast<std::size_t>(cfg.batch_size));
            numkit::Tape tape;
            strategies::Batch batch;
            std::vector<numkit::TensorPtr> ctc_losses;
            for (std::size_t i = start; i < stop; ++i) {
                const auto& item = plan.items[i];
                const auto sel = strategy.train_sel(task, item.utt->lang);
                auto hidden = model.encode(&tape, item.utt->features, sel);
                auto logits = model.logits(&tape, hidden, sel);
                batch.items.push_back(&item);
                batch.hidden.push_back(hidden);
                batch.logits.push_back(logits);
                if (!item.replayed || strategy.ctc_on_replayed()) {
                    auto lp = numkit::log_softmax_rows(&tape, logits);
                    ctc_losses.push_back(ctcwer::ctc_loss(
                        &tape, lp, model.to_local_targets(item.utt->tokens, sel)));
                }
            }
            numkit::TensorPtr base_loss;
            if (ctc_losses.empty()) {
                base_loss = numkit::scalar(0.0);
            } else {
                base_loss = ctc_losses.front();
                for (std::size_t i = 1; i < ctc_losses.size(); ++i)
                    base_loss = numkit::add(&tape, base_loss, ctc_losses[i]);
                base_loss = numkit::scale(&tape, base_loss,
                                          1.0 / static_cast<double>(ctc_losses.size()));
            }
            auto total = strategy.loss_hook(&tape, base_loss, batch, model);
            check(std::isfinite(total->v[0]),
                  "training diverged (non-finite loss) at stage " + label);
            tape.backward(total);
            strategy.grad_hook(model, train_params, static_cast<std::size_t>(cfg.batch_size),
                               rng);
            numkit::clip_grad_norm(train_params, cfg.clip_norm);
            optim.step(train_params);
        }
        stats.final_val_wer = corpus_wer(
            model, plan.val,
            [&](const Utterance& u) { return strategy.train_sel(task, u.lang); }, specs);
        optim.plateau_decay(stats.final_val_wer, cfg.plateau_factor);
    }
    strategy.finalize_task(model, task, cfg.seed);
    return stats;
}

std::map<int, const synthlang::TaskSpec*> spec_index(const LanguageSet& set) {
    std::map<int, const synthlang::TaskSpec*> specs;
    for (const auto& data : set.all) specs[data.spec.lang_id] = &data.spec;
    return specs;
}

std::vector<synthlang::TaskSpec> base_specs(const LanguageSet& set) {
    std::vector<synthlang::TaskSpec> specs;
    for (int id : set.base_ids) specs.push_back(set.all[id].spec);
    return specs;
}

Model build_model(const ExperimentConfig& cfg, const LanguageSet& set) {
    Rng rng(mix_seed(cfg.seed, "model_init"));
    return Model(cfg.encoder_config(), base_specs(set), rng);
}

/// Base pretraining is strategy- and order-independent, so its checkpoint is
/// cached in memory and, when out_dir is set, on disk.
void prepare_base_model(const ExperimentConfig& cfg, Model& model,
                        Strategy& strategy, const TaskView& base_task,
                        const std::map<int, const synthlang::TaskSpec*>& specs,
                        const std::filesystem::path& out_dir, RunCache* cache) {
    const auto disk_path =
        out_dir.empty() ? std::filesystem::path{}
                        : out_dir / ("base_" + cfg.refs_hash() + ".ckpt");
    if (cache != nullptr && cache->base_model.has_value()) {
        model.restore_all(*cache->base_model);
        strategy.prepare_task(model, base_task, {}, cfg.seed);
        strategy.finalize_task(model, base_task, cfg.seed);
        return;
    }
    if (!disk_path.empty() && std::filesystem::exists(disk_path)) {
        model.restore_all(numkit::load_checkpoint(disk_path));
        if (cache != nullptr) cache->base_model = model.snapshot_all();
        strategy.prepare_task(model, base_task, {}, cfg.seed);
        strategy.finalize_task(model, base_task, cfg.seed);
        return;
    }
    train_stage(cfg, model, strategy, base_task, {}, specs, "base");
    if (cache != nullptr) cache->base_model = model.snapshot_all();
    if (!disk_path.empty()) {
        std::filesystem::create_directories(out_dir);
        numkit::save_checkpoint(model.snapshot_all(), disk_path);
    }
}

}  // namespace

LanguageSet build_languages(const ExperimentConfig& cfg) {
    LanguageSet set;
    for (int lang = 0; lang < cfg.total_languages(); ++lang) {
        const auto spec =
            synthlang::gen_language(cfg.gen, lang, mix_seed(cfg.seed, "lang",
                                                            static_cast<std::uint64_t>(lang)));
        set.all.push_back(synthlang::make_task_data(spec));
        if (lang < cfg.base_languages)
            set.base_ids.push_back(lang);
        else
            set.new_ids.push_back(lang);
    }
    return set;
}

std::vector<TaskView> tasks_for_order(const LanguageSet& set,
                                      const std::vector<int>& new_order) {
    std::vector<TaskView> tasks;
    TaskView base;
    base.task_index = 0;
    for (int id : set.base_ids) base.members.push_back(&set.all[id]);
    tasks.push_back(std::move(base));
    int index = 1;
    for (int id : new_order) {
        check(id >= static_cast<int>(set.base_ids.size()) &&
                  id < static_cast<int>(set.all.size()),
              cat("tasks_for_order: ", id, " is not a new-language id"));
        TaskView t;
        t.task_index = index++;
        t.members.push_back(&set.all[id]);
        tasks.push_back(std::move(t));
    }
    return tasks;
}

ReferenceWers select_references(const ReferencePool& pool, const std::vector<int>& new_order) {
    ReferenceWers refs;
    for (int id : new_order) {
        check(pool.joint.count(id) != 0 && pool.solo.count(id) != 0,
              cat("references: no pooled entry for language ", id));
        refs.joint.push_back(pool.joint.at(id));
        refs.solo.push_back(pool.solo.at(id));
    }
    return refs;
}

void RunCache::rekey(const std::string& new_key) {
    if (key == new_key) return;
    key = new_key;
    base_model.reset();
    refs.reset();
}

double evaluate_task(const Model& model, const Strategy& strategy, const TaskView& task) {
    std::map<int, const synthlang::TaskSpec*> specs;
    for (const auto* data : task.members) specs[data->spec.lang_id] = &data->spec;
    if (task.is_base()) {
        double sum = 0.0;
        for (const auto* data : task.members) {
            std::vector<const Utterance*> utts;
            for (const auto& u : data->test.utts) utts.push_back(&u);
            sum += corpus_wer(
                model, utts,
                [&](const Utterance& u) { return strategy.eval_sel(u.lang, true); }, specs);
        }
        return sum / static_cast<double>(task.members.size());
    }
    std::vector<const Utterance*> utts;
    for (const auto& u : task.members.front()->test.utts) utts.push_back(&u);
    return corpus_wer(
        model, utts, [&](const Utterance& u) { return strategy.eval_sel(u.lang, false); },
        specs);
}

namespace {

const double kPercent = 100.0;

std::filesystem::path refs_path(const ExperimentConfig& cfg,
                                const std::filesystem::path& out_dir) {
    return out_dir / ("refs_" + cfg.refs_hash() + ".json");
}

std::optional<ReferencePool> load_reference_pool(const std::filesystem::path& path,
                                                 const std::string& refs_hash,
                                                 const ExperimentConfig& cfg,
                                                 std::string* budget_warning) {
    std::ifstream is(path);
    if (!is.good()) return std::nullopt;
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
    if (j.value("refs_hash", "") != refs_hash) return std::nullopt;
    if (budget_warning != nullptr && (j.value("base_epochs", -1) != cfg.base_epochs ||
                                      j.value("task_epochs", -1) != cfg.task_epochs))
        *budget_warning =
            cat("reference budgets (", j.value("base_epochs", -1), "/",
                j.value("task_epochs", -1), ") differ from the run (", cfg.base_epochs, "/",
                cfg.task_epochs, ")");
    ReferencePool pool;
    for (const auto& [key, value] : j.at("joint").items())
        pool.joint[std::stoi(key)] = value.get<double>();
    for (const auto& [key, value] : j.at("solo").items())
        pool.solo[std::stoi(key)] = value.get<double>();
    return pool;
}

void save_reference_pool(const ReferencePool& pool, const ExperimentConfig& cfg,
                         const std::filesystem::path& path) {
    nlohmann::json j;
    j["refs_hash"] = cfg.refs_hash();
    j["base_epochs"] = cfg.base_epochs;
    j["task_epochs"] = cfg.task_epochs;
    auto joint = nlohmann::json::object();
    for (const auto& [lang, wer] : pool.joint) joint[std::to_string(lang)] = wer;
    auto solo = nlohmann::json::object();
    for (const auto& [lang, wer] : pool.solo) solo[std::to_string(lang)] = wer;
    j["joint"] = joint;
    j["solo"] = solo;
    write_text_atomic(path, j.dump(2) + "\n");
}

}  // namespace

RunResult run_sequence(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                       const std::vector<int>* order, RunCache* cache) {
    if (cache != nullptr) cache->rekey(cfg.refs_hash());
    const auto set = build_languages(cfg);
    const auto specs = spec_index(set);
    const auto new_order = order != nullptr ? *order : set.new_ids;
    check(new_order.size() == set.new_ids.size(),
          "run_sequence: order must cover every new language exactly once");
    const auto tasks = tasks_for_order(set, new_order);

    Model model = build_model(cfg, set);
    auto strategy = strategies::make_strategy(cfg.strategy);

    RunResult result;
    auto& record = result.record;
    record.config_hash = cfg.config_hash();
    record.refs_hash = cfg.refs_hash();
    record.strategy = strategies::strategy_name(cfg.strategy.kind);
    record.seed = cfg.seed;

    auto clock0 = std::chrono::steady_clock::now();
    prepare_base_model(cfg, model, *strategy, tasks.front(), specs, out_dir, cache);
    record.wall_clock.push_back({"base", seconds_since(clock0)});

    std::vector<std::string> labels{"base"};
    record.matrix.append_row({kPercent * evaluate_task(model, *strategy, tasks.front())},
                             "base");

    std::vector<TaskView> history{tasks.front()};
    for (std::size_t stage = 1; stage < tasks.size(); ++stage) {
        const auto& task = tasks[stage];
        const auto& label = task.members.front()->spec.name;
        record.language_order.push_back(label);
        clock0 = std::chrono::steady_clock::now();
        train_stage(cfg, model, *strategy, task, history, specs, label);
        record.wall_clock.push_back({label, seconds_since(clock0)});

        std::vector<double> row;
        for (std::size_t i = 0; i <= stage; ++i)
            row.push_back(kPercent * evaluate_task(model, *strategy, tasks[i]));
        record.matrix.append_row(std::move(row), label);
        history.push_back(task);
    }
    result.agem_dots = strategy->projection_diagnostics();

    std::optional<ReferenceWers> refs;
    if (cache != nullptr && cache->refs.has_value()) {
        refs = select_references(*cache->refs, new_order);
    } else if (!out_dir.empty()) {
        if (auto pool = load_reference_pool(refs_path(cfg, out_dir), cfg.refs_hash(), cfg,
                                            &record.budget_warning)) {
            if (cache != nullptr) cache->refs = pool;
            refs = select_references(*pool, new_order);
        }
    }
    record.refs = refs;
    record.metrics = compute_series(record.matrix, refs ? &*refs : nullptr);

    if (!out_dir.empty()) save_record(record, out_dir);
    return result;
}

ReferencePool run_references(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                             RunCache* cache) {
    if (cache != nullptr) cache->rekey(cfg.refs_hash());
    if (cache != nullptr && cache->refs.has_value()) return *cache->refs;
    if (!out_dir.empty()) {
        if (auto pool =
                load_reference_pool(refs_path(cfg, out_dir), cfg.refs_hash(), cfg, nullptr)) {
            if (cache != nullptr) cache->refs = pool;
            return *pool;
        }
    }

    const auto set = build_languages(cfg);
    const auto specs = spec_index(set);
    ReferencePool pool;

    // Joint reference: every language trained together, with the base
    // pretraining budget.
    {
        ExperimentConfig joint_cfg = cfg;
        joint_cfg.strategy.kind = strategies::StrategyKind::ft;
        Model model = build_model(cfg, set);
        for (int id : set.new_ids) {
            Rng rng(mix_seed(cfg.seed, "lang_token", static_cast<std::uint64_t>(id)));
            model.register_language(set.all[id].spec, rng);
        }
        auto ft = strategies::make_strategy(joint_cfg.strategy);
        TaskView joint_task;
        joint_task.task_index = 0;  // trains with the base budget
        for (const auto& data : set.all) joint_task.members.push_back(&data);
        train_stage(joint_cfg, model, *ft, joint_task, {}, specs, "joint");
        for (int id : set.new_ids) {
            TaskView t;
            t.task_index = 1;
            t.members.push_back(&set.all[id]);
            pool.joint[id] = kPercent * evaluate_task(model, *ft, t);
        }
    }

    // Solo references: one fine-tune per new language from the base model,
    // sharing the exact stage stream of a main run's first stage.
    {
        ExperimentConfig solo_cfg = cfg;
        solo_cfg.strategy.kind = strategies::StrategyKind::ft;
        std::optional<numkit::Checkpoint> base_ckpt;
        if (cache != nullptr && cache->base_model.has_value()) base_ckpt = cache->base_model;
        for (int id : set.new_ids) {
            Model model = build_model(cfg, set);
            auto ft = strategies::make_strategy(solo_cfg.strategy);
            TaskView base_task;
            base_task.task_index = 0;
            for (int b : set.base_ids) base_task.members.push_back(&set.all[b]);
            if (base_ckpt.has_value()) {
                model.restore_all(*base_ckpt);
            } else {
                prepare_base_model(cfg, model, *ft, base_task, specs, out_dir, cache);
                base_ckpt = model.snapshot_all();
            }
            TaskView t;
            t.task_index = 1;
            t.members.push_back(&set.all[id]);
            train_stage(solo_cfg, model, *ft, t, {base_task}, specs,
                        "solo_" + set.all[id].spec.name);
            pool.solo[id] = kPercent * evaluate_task(model, *ft, t);
        }
    }

    if (cache != nullptr) cache->refs = pool;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        save_reference_pool(pool, cfg, refs_path(cfg, out_dir));
    }
    return pool;
}

namespace {

OrderingSummary::Series summarize(const std::vector<std::vector<double>>& columns,
                                  int first_stage) {
    OrderingSummary::Series s;
    s.first_stage = first_stage;
    if (columns.empty()) return s;
    const std::size_t stages = columns.front().size();
    const double n = static_cast<double>(columns.size());
    for (std::size_t i = 0; i < stages; ++i) {
        double mean = 0.0;
        for (const auto& run : columns) mean += run[i];
        mean /= n;
        double var = 0.0;
        for (const auto& run : columns) var += (run[i] - mean) * (run[i] - mean);
        var = columns.size() > 1 ? var / (n - 1.0) : 0.0;
        s.mean.push_back(mean);
        s.stddev.push_back(std::sqrt(var));
    }
    return s;
}

}  // namespace

OrderingSummary ordering_study(const ExperimentConfig& cfg, int n_orders,
                               std::uint64_t order_seed,
                               const std::filesystem::path& out_dir) {
    check(n_orders >= 2, "ordering_study: need at least two orders");
    const auto set = build_languages(cfg);
    RunCache cache;

    // References are order-independent; compute them once and let the cache
    // feed every run.
    run_references(cfg, out_dir, &cache);

    OrderingSummary summary;
    summary.n_orders = n_orders;
    std::vector<std::vector<double>> awer_cols, bwt_cols, im_cols, fwt_cols;
    for (int k = 0; k < n_orders; ++k) {
        auto order = set.new_ids;
        Rng rng(mix_seed(order_seed, "order", static_cast<std::uint64_t>(k)));
        rng.shuffle(order);
        auto result = run_sequence(cfg, {}, &order, &cache);
        check(result.record.refs.has_value(), "ordering_study: references missing from run");
        awer_cols.push_back(result.record.metrics.awer);
        bwt_cols.push_back(result.record.metrics.bwt);
        im_cols.push_back(*result.record.metrics.im);
        fwt_cols.push_back(*result.record.metrics.fwt);
        summary.runs.push_back(std::move(result.record));
    }
    summary.awer = summarize(awer_cols, 1);
    summary.bwt = summarize(bwt_cols, 2);
    summary.im = summarize(im_cols, 2);
    summary.fwt = summarize(fwt_cols, 2);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text_atomic(out_dir / "ordering_summary.csv", render_ordering_csv(summary));
    }
    return summary;
}

std::string render_ordering_csv(const OrderingSummary& summary) {
    char buf[96];
    std::string out = "stage,metric,mean,std\n";
    auto emit = [&](const char* name, const OrderingSummary::Series& s) {
        for (std::size_t i = 0; i < s.mean.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%.17g\n",
                          s.first_stage + static_cast<int>(i), name, s.mean[i], s.stddev[i]);
            out += buf;
        }
    };
    emit("awer", summary.awer);
    emit("bwt", summary.bwt);
    emit("im", summary.im);
    emit("fwt", summary.fwt);
    return out;
}

const ImbalanceEntry& ImbalanceSummary::entry(const std::string& strategy,
                                              const std::string& variant) const {
    for (const auto& e : entries)
        if (e.strategy == strategy && e.variant == variant) return e;
    fail("imbalance: no entry for " + strategy + "/" + variant);
}

ImbalanceSummary imbalance_study(const ExperimentConfig& cfg,
                                 const std::filesystem::path& out_dir) {
    ImbalanceSummary summary;
    for (const bool balanced : {false, true}) {
        RunCache cache;  // the base model is shared by both strategies
        for (const auto kind : {strategies::StrategyKind::ft, strategies::StrategyKind::er}) {
            ExperimentConfig variant = cfg;
            variant.strategy.kind = kind;
            if (balanced) variant.base_epochs = variant.task_epochs;
            auto result = run_sequence(variant, {}, nullptr, &cache);
            summary.entries.push_back({strategies::strategy_name(kind),
                                       balanced ? "balanced" : "imbalanced",
                                       bwt(result.record.matrix, 2)});
        }
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text_atomic(out_dir / "imbalance_summary.csv", render_imbalance_csv(summary));
    }
    return summary;
}

std::string render_imbalance_csv(const ImbalanceSummary& summary) {
    std::string out = "strategy,variant,first_stage_bwt,drop_magnitude\n";
    char buf[96];
    for (const auto& e : summary.entries) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g\n", e.strategy.c_str(),
                      e.variant.c_str(), e.first_bwt, e.drop_magnitude());
        out += buf;
    }
    return out;
}

}  // namespace clseq::clbench
