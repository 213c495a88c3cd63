#include "clseq/seqmodel/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "clseq/ctcwer/ctc.hpp"
#include "clseq/error.hpp"

namespace clseq::seqmodel {

using numkit::Rng;
using numkit::Tape;
using numkit::TensorPtr;

std::string regime_name(TokenRegime regime) {
    return regime == TokenRegime::shared ? "shared" : "per_language";
}

TokenRegime regime_from(const std::string& name) {
    if (name == "shared") return TokenRegime::shared;
    if (name == "per_language") return TokenRegime::per_language;
    fail("regime_from: unknown regime '" + name + "'");
}

namespace {

TensorPtr init_matrix(numkit::ParamStore& store, const std::string& name, std::size_t r,
                      std::size_t c, Rng& rng) {
    auto t = numkit::tensor({r, c});
    const double s = 1.0 / std::sqrt(static_cast<double>(r));
    for (auto& x : t->v) x = rng.normal(0.0, s);
    return store.add(name, t);
}

TensorPtr init_bias(numkit::ParamStore& store, const std::string& name, std::size_t c) {
    return store.add(name, numkit::tensor({1, c}));
}

// Appends one column to a (r x c) matrix in place.
void append_column(numkit::Tensor& t, const std::vector<double>& col) {
    const std::size_t r = t.rows(), c = t.cols();
    std::vector<double> nv(r * (c + 1));
    for (std::size_t i = 0; i < r; ++i) {
        std::copy(t.v.begin() + i * c, t.v.begin() + (i + 1) * c, nv.begin() + i * (c + 1));
        nv[i * (c + 1) + c] = col[i];
    }
    t.v = std::move(nv);
    t.shape[1] = c + 1;
    t.g.clear();
}

// One pass of the gated cell over a frame sequence.
TensorPtr gated_recurrence(Tape* tape, const TensorPtr& input, std::size_t d_model,
                           const TensorPtr& wz, const TensorPtr& uz, const TensorPtr& bz,
                           const TensorPtr& wh, const TensorPtr& uh, const TensorPtr& bh) {
    const std::size_t time = input->rows();
    auto h = numkit::tensor({1, d_model});
    auto ones = numkit::tensor({1, d_model}, 1.0);
    std::vector<TensorPtr> outputs;
    outputs.reserve(time);
    for (std::size_t t = 0; t < time; ++t) {
        auto x = numkit::slice_rows(tape, input, t, t + 1);
        auto z = numkit::sigmoid(
            tape, numkit::add(tape,
                              numkit::add(tape, numkit::matmul(tape, x, wz),
                                          numkit::matmul(tape, h, uz)),
                              bz));
        auto cand = numkit::tanh(
            tape, numkit::add(tape,
                              numkit::add(tape, numkit::matmul(tape, x, wh),
                                          numkit::matmul(tape, h, uh)),
                              bh));
        h = numkit::add(tape, numkit::mul(tape, z, h),
                        numkit::mul(tape, numkit::sub(tape, ones, z), cand));
        outputs.push_back(h);
    }
    return numkit::concat_rows(tape, outputs);
}

}  // namespace

Model::Model(EncoderConfig cfg, const std::vector<synthlang::TaskSpec>& base_tasks, Rng& rng)
    : cfg_(cfg) {
    check(cfg_.d_in > 0 && cfg_.d_model > 0 && cfg_.layers > 0, "model: bad dimensions");
    check(cfg_.global_tokens > 0, "model: global_tokens must be positive");
    build_encoder(rng);
    if (cfg_.regime == TokenRegime::shared) {
        shared_head_ = make_union_head(params_, rng);
        for (const auto& task : base_tasks) add_language_token(task.lang_id, rng);
    } else {
        check(!base_tasks.empty(), "model: per-language regime needs base tasks");
        std::set<int> merged;
        for (const auto& task : base_tasks) merged.insert(task.vocab.begin(), task.vocab.end());
        base_head_.local_to_global.push_back(ctcwer::kBlank);
        base_head_.local_to_global.insert(base_head_.local_to_global.end(), merged.begin(),
                                          merged.end());
        base_head_.usable_cols = base_head_.local_to_global.size();
        base_head_.w = init_matrix(params_, "head.base.w", cfg_.d_model,
                                   base_head_.usable_cols, rng);
        base_head_.b = init_bias(params_, "head.base.b", base_head_.usable_cols);
    }
}

void Model::build_encoder(Rng& rng) {
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
        const std::size_t in = l == 0 ? cfg_.d_in : cfg_.d_model;
        const std::string p = cat("enc", l, ".");
        init_matrix(params_, p + "wz", in, cfg_.d_model, rng);
        init_matrix(params_, p + "uz", cfg_.d_model, cfg_.d_model, rng);
        init_bias(params_, p + "bz", cfg_.d_model);
        init_matrix(params_, p + "wh", in, cfg_.d_model, rng);
        init_matrix(params_, p + "uh", cfg_.d_model, cfg_.d_model, rng);
        init_bias(params_, p + "bh", cfg_.d_model);
    }
}

Head Model::make_union_head(numkit::ParamStore& store, Rng& rng) const {
    Head head;
    const std::size_t cols = 1 + static_cast<std::size_t>(cfg_.global_tokens);
    head.w = init_matrix(store, "head.w", cfg_.d_model, cols, rng);
    head.b = init_bias(store, "head.b", cols);
    head.local_to_global.resize(cols);
    for (std::size_t i = 0; i < cols; ++i) head.local_to_global[i] = static_cast<int>(i);
    head.usable_cols = cols;
    return head;
}

Head Model::make_task_head(const synthlang::TaskSpec& task, numkit::ParamStore& store,
                           Rng& rng) const {
    Head head;
    head.local_to_global.push_back(ctcwer::kBlank);
    head.local_to_global.insert(head.local_to_global.end(), task.vocab.begin(),
                                task.vocab.end());
    head.usable_cols = head.local_to_global.size();
    head.w = init_matrix(store, cat("head.lang", task.lang_id, ".w"), cfg_.d_model,
                         head.usable_cols, rng);
    head.b = init_bias(store, cat("head.lang", task.lang_id, ".b"), head.usable_cols);
    return head;
}

void Model::add_language_token(int lang_id, Rng& rng) {
    check(cfg_.regime == TokenRegime::shared,
          "add_language_token: only the shared-token regime has language tokens");
    check(shared_lang_column(lang_id) < 0,
          cat("add_language_token: language ", lang_id, " already registered"));
    std::vector<double> col(cfg_.d_model);
    const double s = 1.0 / std::sqrt(static_cast<double>(cfg_.d_model));
    for (auto& x : col) x = rng.normal(0.0, s);
    append_column(*shared_head_.w, col);
    append_column(*shared_head_.b, {0.0});
    shared_langs_.push_back(lang_id);
    // The whole embedding/projection layer is tuned once a token is added.
    params_.set_frozen("head.w", false);
    params_.set_frozen("head.b", false);
}

void Model::add_task_head(const synthlang::TaskSpec& task, Rng& rng) {
    check(cfg_.regime == TokenRegime::per_language,
          "add_task_head: only the per-language regime has per-task heads");
    check(lang_heads_.count(task.lang_id) == 0,
          cat("add_task_head: language ", task.lang_id, " already has a head"));
    lang_heads_[task.lang_id] = make_task_head(task, params_, rng);
    head_order_.push_back(task.lang_id);
}

void Model::register_language(const synthlang::TaskSpec& task, Rng& rng) {
    if (cfg_.regime == TokenRegime::shared)
        add_language_token(task.lang_id, rng);
    else
        add_task_head(task, rng);
}

bool Model::language_registered(int lang_id) const {
    if (cfg_.regime == TokenRegime::shared) return shared_lang_column(lang_id) >= 0;
    return lang_heads_.count(lang_id) != 0;
}

std::size_t Model::head_vocab_size() const {
    check(cfg_.regime == TokenRegime::shared, "head_vocab_size: shared regime only");
    return shared_head_.w->cols();
}

int Model::shared_lang_column(int lang_id) const {
    for (std::size_t i = 0; i < shared_langs_.size(); ++i)
        if (shared_langs_[i] == lang_id)
            return static_cast<int>(shared_head_.usable_cols + i);
    return -1;
}

PnnColumn& Model::create_pnn_column(int lang, const synthlang::TaskSpec& task, Rng& rng) {
    auto& col = adapters_.emplace_pnn(lang);
    init_matrix(col.params, "wz", cfg_.d_model, cfg_.d_model, rng);
    init_matrix(col.params, "uz", cfg_.d_model, cfg_.d_model, rng);
    init_bias(col.params, "bz", cfg_.d_model);
    init_matrix(col.params, "wh", cfg_.d_model, cfg_.d_model, rng);
    init_matrix(col.params, "uh", cfg_.d_model, cfg_.d_model, rng);
    init_bias(col.params, "bh", cfg_.d_model);
    if (cfg_.regime == TokenRegime::shared) {
        const std::size_t cols = shared_head_.usable_cols;
        col.head.w = init_matrix(col.params, "head.w", cfg_.d_model, cols, rng);
        col.head.b = init_bias(col.params, "head.b", cols);
        col.head.local_to_global = shared_head_.local_to_global;
        col.head.usable_cols = cols;
    } else {
        col.head = make_task_head(task, col.params, rng);
    }
    return col;
}

PiggybackMask& Model::create_piggyback(int lang, const synthlang::TaskSpec& task, double init,
                                       double threshold, Rng& rng) {
    auto& pb = adapters_.emplace_pb(lang);
    pb.threshold = threshold;
    const std::string last = cat("enc", cfg_.layers - 1, ".");
    pb.masked = {last + "wz", last + "uz", last + "bz", last + "wh", last + "uh", last + "bh"};
    if (cfg_.regime == TokenRegime::shared) {
        pb.masked.push_back("head.w");
        pb.masked.push_back("head.b");
        pb.head = shared_head_;
        pb.has_task_head = false;
    } else {
        pb.head = make_task_head(task, pb.head_params, rng);
        pb.has_task_head = true;
    }
    for (const auto& name : pb.masked) {
        auto base = params_.at(name);
        pb.real_weights.add("mask." + name, numkit::tensor(base->shape, init));
    }
    return pb;
}

PromptEntry& Model::create_prompt(int lang, const synthlang::TaskSpec& task, Rng& rng) {
    auto& entry = adapters_.emplace_l2p(lang);
    auto prompt = numkit::tensor({cfg_.d_model, cfg_.d_model});
    for (std::size_t i = 0; i < cfg_.d_model; ++i)
        for (std::size_t j = 0; j < cfg_.d_model; ++j)
            prompt->v[i * cfg_.d_model + j] = (i == j ? 1.0 : 0.0) + 0.01 * rng.normal();
    entry.params.add("prompt", prompt);
    if (cfg_.regime == TokenRegime::shared) {
        entry.head = shared_head_;
        entry.has_task_head = false;
    } else {
        entry.head = make_task_head(task, entry.params, rng);
        entry.has_task_head = true;
    }
    return entry;
}

numkit::TensorPtr Model::run_cell(Tape* tape, const TensorPtr& input, std::size_t layer,
                                  const PiggybackMask* mask) const {
    const std::string p = cat("enc", layer, ".");
    auto fetch = [&](const std::string& suffix) -> TensorPtr {
        const std::string name = p + suffix;
        auto base = params_.at(name);
        if (mask != nullptr &&
            std::find(mask->masked.begin(), mask->masked.end(), name) != mask->masked.end())
            return numkit::masked_values(tape, base, mask->real_weights.at("mask." + name),
                                         mask->threshold);
        return base;
    };
    return gated_recurrence(tape, input, cfg_.d_model, fetch("wz"), fetch("uz"), fetch("bz"),
                            fetch("wh"), fetch("uh"), fetch("bh"));
}

numkit::TensorPtr Model::run_encoder(Tape* tape, const TensorPtr& features,
                                     const PiggybackMask* mask) const {
    check(features != nullptr && features->shape.size() == 2 && features->rows() >= 1,
          "encode: features must be a nonempty time x d_in matrix");
    check(features->cols() == cfg_.d_in,
          cat("encode: feature width ", features->cols(), " does not match d_in ", cfg_.d_in));
    TensorPtr h = features;
    for (std::size_t l = 0; l < cfg_.layers; ++l) h = run_cell(tape, h, l, mask);
    return h;
}

numkit::TensorPtr Model::encode(Tape* tape, const TensorPtr& features, const Sel& sel) const {
    switch (sel.kind) {
        case AdapterKind::none:
            return run_encoder(tape, features, nullptr);
        case AdapterKind::pb:
            return run_encoder(tape, features, &adapters_.pb(sel.lang));
        case AdapterKind::l2p: {
            const auto& entry = adapters_.l2p(sel.lang);
            auto h = run_encoder(tape, features, nullptr);
            return numkit::matmul(tape, h, entry.params.at("prompt"));
        }
        case AdapterKind::pnn: {
            // Lateral input is the frozen base encoder output only.
            const auto& col = adapters_.pnn(sel.lang);
            auto base_out = run_encoder(tape, features, nullptr);
            return gated_recurrence(tape, base_out, cfg_.d_model, col.params.at("wz"),
                                    col.params.at("uz"), col.params.at("bz"),
                                    col.params.at("wh"), col.params.at("uh"),
                                    col.params.at("bh"));
        }
    }
    fail("encode: bad adapter kind");
}

const Head& Model::head_for(const Sel& sel) const {
    switch (sel.kind) {
        case AdapterKind::none:
            if (cfg_.regime == TokenRegime::shared) return shared_head_;
            if (auto it = lang_heads_.find(sel.lang); it != lang_heads_.end())
                return it->second;
            check(base_head_.w != nullptr, "head_for: no head for language");
            return base_head_;
        case AdapterKind::pnn:
            return adapters_.pnn(sel.lang).head;
        case AdapterKind::pb: {
            const auto& pb = adapters_.pb(sel.lang);
            return pb.has_task_head ? pb.head : shared_head_;
        }
        case AdapterKind::l2p: {
            const auto& entry = adapters_.l2p(sel.lang);
            return entry.has_task_head ? entry.head : shared_head_;
        }
    }
    fail("head_for: bad adapter kind");
}

numkit::TensorPtr Model::logits(Tape* tape, const TensorPtr& hidden, const Sel& sel) const {
    switch (sel.kind) {
        case AdapterKind::none: {
            if (cfg_.regime == TokenRegime::shared) {
                // lang < 0 skips the conditioning column (distillation path).
                if (sel.lang < 0)
                    return numkit::add_rowwise(
                        tape, numkit::matmul(tape, hidden, shared_head_.w), shared_head_.b);
                const int col = shared_lang_column(sel.lang);
                check(col >= 0, cat("logits: language ", sel.lang, " has no language token"));
                auto conditioned = numkit::add_column_broadcast(
                    tape, hidden, shared_head_.w, static_cast<std::size_t>(col));
                return numkit::add_rowwise(
                    tape, numkit::matmul(tape, conditioned, shared_head_.w), shared_head_.b);
            }
            const auto& head = head_for(sel);
            return numkit::add_rowwise(tape, numkit::matmul(tape, hidden, head.w), head.b);
        }
        case AdapterKind::pnn: {
            const auto& head = adapters_.pnn(sel.lang).head;
            return numkit::add_rowwise(tape, numkit::matmul(tape, hidden, head.w), head.b);
        }
        case AdapterKind::pb: {
            const auto& pb = adapters_.pb(sel.lang);
            if (pb.has_task_head)
                return numkit::add_rowwise(tape, numkit::matmul(tape, hidden, pb.head.w),
                                           pb.head.b);
            auto w = numkit::masked_values(tape, shared_head_.w,
                                           pb.real_weights.at("mask.head.w"), pb.threshold);
            auto b = numkit::masked_values(tape, shared_head_.b,
                                           pb.real_weights.at("mask.head.b"), pb.threshold);
            return numkit::add_rowwise(tape, numkit::matmul(tape, hidden, w), b);
        }
        case AdapterKind::l2p: {
            const auto& head = head_for(sel);
            return numkit::add_rowwise(tape, numkit::matmul(tape, hidden, head.w), head.b);
        }
    }
    fail("logits: bad adapter kind");
}

numkit::TensorPtr Model::forward(Tape* tape, const TensorPtr& features, const Sel& sel) const {
    return logits(tape, encode(tape, features, sel), sel);
}

std::vector<int> Model::to_local_targets(const ctcwer::TokenSeq& tokens, const Sel& sel) const {
    const auto& head = head_for(sel);
    std::vector<int> out;
    out.reserve(tokens.ids.size());
    for (int id : tokens.ids) {
        check(id != ctcwer::kBlank, "to_local_targets: blank in transcript");
        const int local = head.to_local(id);
        check(local >= 0, cat("to_local_targets: token ", id,
                              " not in the selected head's vocabulary"));
        out.push_back(local);
    }
    return out;
}

std::vector<int> Model::to_global(const std::vector<int>& local_ids, const Sel& sel) const {
    const auto& head = head_for(sel);
    std::vector<int> out;
    out.reserve(local_ids.size());
    for (int id : local_ids) {
        check(id >= 0 && static_cast<std::size_t>(id) < head.local_to_global.size(),
              cat("to_global: local id ", id, " out of range"));
        out.push_back(head.local_to_global[id]);
    }
    return out;
}

std::size_t Model::decode_cols(const Sel& sel) const { return head_for(sel).usable_cols; }

std::vector<const Head*> Model::previous_heads(int lang) const {
    std::vector<const Head*> heads;
    if (cfg_.regime == TokenRegime::shared) {
        heads.push_back(&shared_head_);
        return heads;
    }
    heads.push_back(&base_head_);
    for (int id : head_order_)
        if (id != lang) heads.push_back(&lang_heads_.at(id));
    return heads;
}

numkit::Checkpoint Model::snapshot_all() const {
    numkit::Checkpoint ckpt = numkit::snapshot(params_);
    nlohmann::json meta;
    meta["regime"] = regime_name(cfg_.regime);
    meta["d_in"] = cfg_.d_in;
    meta["d_model"] = cfg_.d_model;
    meta["layers"] = cfg_.layers;
    meta["global_tokens"] = cfg_.global_tokens;
    meta["shared_langs"] = shared_langs_;
    meta["head_order"] = head_order_;
    if (cfg_.regime == TokenRegime::per_language)
        meta["base_head"] = base_head_.local_to_global;
    auto heads = nlohmann::json::object();
    for (const auto& [lang, head] : lang_heads_)
        heads[std::to_string(lang)] = head.local_to_global;
    meta["lang_heads"] = heads;

    auto adapters = nlohmann::json::array();
    auto dump_store = [&](const numkit::ParamStore& store, const std::string& prefix) {
        for (const auto& e : store)
            ckpt.entries.push_back({prefix + e.name, e.tensor->shape, e.tensor->v, e.frozen});
    };
    for (const auto& [lang, col] : adapters_.all_pnn()) {
        adapters.push_back({{"kind", "pnn"},
                            {"lang", lang},
                            {"local_to_global", col.head.local_to_global}});
        dump_store(col.params, cat("adapter.pnn.", lang, "."));
    }
    for (const auto& [lang, pb] : adapters_.all_pb()) {
        adapters.push_back({{"kind", "pb"},
                            {"lang", lang},
                            {"threshold", pb.threshold},
                            {"masked", pb.masked},
                            {"has_task_head", pb.has_task_head},
                            {"local_to_global", pb.head.local_to_global}});
        dump_store(pb.real_weights, cat("adapter.pb.", lang, "."));
        if (pb.has_task_head) dump_store(pb.head_params, cat("adapter.pb.", lang, ".task."));
    }
    for (const auto& [lang, entry] : adapters_.all_l2p()) {
        adapters.push_back({{"kind", "l2p"},
                            {"lang", lang},
                            {"has_task_head", entry.has_task_head},
                            {"local_to_global", entry.head.local_to_global}});
        dump_store(entry.params, cat("adapter.l2p.", lang, "."));
    }
    meta["adapters"] = adapters;
    ckpt.meta_json = meta.dump();
    return ckpt;
}

void Model::restore_all(const numkit::Checkpoint& ckpt) {
    nlohmann::json meta = nlohmann::json::parse(ckpt.meta_json);
    check(meta.at("regime").get<std::string>() == regime_name(cfg_.regime) &&
              meta.at("d_in").get<std::size_t>() == cfg_.d_in &&
              meta.at("d_model").get<std::size_t>() == cfg_.d_model &&
              meta.at("layers").get<std::size_t>() == cfg_.layers &&
              meta.at("global_tokens").get<int>() == cfg_.global_tokens,
          "restore: checkpoint was written for a different model configuration");

    Rng dummy(0);
    for (int lang : meta.at("shared_langs").get<std::vector<int>>())
        if (shared_lang_column(lang) < 0) add_language_token(lang, dummy);
    check(meta.at("shared_langs").get<std::vector<int>>() == shared_langs_,
          "restore: language-token registration order differs from the checkpoint");

    if (cfg_.regime == TokenRegime::per_language) {
        const auto base_map = meta.at("base_head").get<std::vector<int>>();
        if (base_head_.w == nullptr) {
            base_head_.local_to_global = base_map;
            base_head_.usable_cols = base_map.size();
            base_head_.w = init_matrix(params_, "head.base.w", cfg_.d_model, base_map.size(),
                                       dummy);
            base_head_.b = init_bias(params_, "head.base.b", base_map.size());
        }
        check(base_head_.local_to_global == base_map,
              "restore: base head vocabulary differs from the checkpoint");
        for (int lang : meta.at("head_order").get<std::vector<int>>()) {
            if (lang_heads_.count(lang)) continue;
            synthlang::TaskSpec stub;
            stub.lang_id = lang;
            const auto map =
                meta.at("lang_heads").at(std::to_string(lang)).get<std::vector<int>>();
            stub.vocab.assign(map.begin() + 1, map.end());
            add_task_head(stub, dummy);
        }
    }

    for (const auto& a : meta.at("adapters")) {
        const auto kind = a.at("kind").get<std::string>();
        const int lang = a.at("lang").get<int>();
        const auto map = a.at("local_to_global").get<std::vector<int>>();
        synthlang::TaskSpec stub;
        stub.lang_id = lang;
        stub.vocab.assign(map.begin() + 1, map.end());
        if (kind == "pnn" && !adapters_.has(AdapterKind::pnn, lang))
            create_pnn_column(lang, stub, dummy);
        else if (kind == "pb" && !adapters_.has(AdapterKind::pb, lang))
            create_piggyback(lang, stub, 0.0, a.at("threshold").get<double>(), dummy);
        else if (kind == "l2p" && !adapters_.has(AdapterKind::l2p, lang))
            create_prompt(lang, stub, dummy);
    }

    numkit::Checkpoint base_part;
    for (const auto& e : ckpt.entries) {
        if (e.name.rfind("adapter.", 0) == 0) continue;
        base_part.entries.push_back(e);
    }
    restore(base_part, params_);

    auto restore_prefixed = [&](numkit::ParamStore& store, const std::string& prefix) {
        numkit::Checkpoint part;
        for (const auto& e : ckpt.entries) {
            if (e.name.rfind(prefix, 0) != 0) continue;
            auto copy = e;
            copy.name = e.name.substr(prefix.size());
            if (copy.name.rfind("task.", 0) == 0) continue;  // handled separately
            if (store.contains(copy.name)) part.entries.push_back(std::move(copy));
        }
        restore(part, store);
    };
    for (auto& [lang, col] : adapters_.all_pnn())
        restore_prefixed(col.params, cat("adapter.pnn.", lang, "."));
    for (auto& [lang, pb] : adapters_.all_pb()) {
        restore_prefixed(pb.real_weights, cat("adapter.pb.", lang, "."));
        if (pb.has_task_head) {
            numkit::Checkpoint part;
            const std::string prefix = cat("adapter.pb.", lang, ".task.");
            for (const auto& e : ckpt.entries) {
                if (e.name.rfind(prefix, 0) != 0) continue;
                auto copy = e;
                copy.name = e.name.substr(prefix.size());
                part.entries.push_back(std::move(copy));
            }
            restore(part, pb.head_params);
        }
    }
    for (auto& [lang, entry] : adapters_.all_l2p())
        restore_prefixed(entry.params, cat("adapter.l2p.", lang, "."));
}

Model Model::clone() const {
    Model copy(cfg_, SkeletonTag{});
    copy.restore_all(snapshot_all());
    return copy;
}

Model::Model(EncoderConfig cfg, SkeletonTag) : cfg_(cfg) {
    Rng rng(0);
    build_encoder(rng);
    if (cfg_.regime == TokenRegime::shared) shared_head_ = make_union_head(params_, rng);
}

Model Model::skeleton(EncoderConfig cfg) { return Model(cfg, SkeletonTag{}); }

}  // namespace clseq::seqmodel
