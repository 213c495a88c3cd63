#include <doctest.h>

#include <cmath>
#include <set>

#include "clseq/strategies/architecture.hpp"
#include "clseq/strategies/regularization.hpp"
#include "clseq/strategies/rehearsal.hpp"

using namespace clseq;
using namespace clseq::strategies;
using numkit::Rng;
using numkit::Tape;
using numkit::TensorPtr;
using seqmodel::AdapterKind;
using seqmodel::Model;

namespace {

struct World {
    synthlang::GeneratorConfig gen;
    std::vector<synthlang::TaskData> data;
    seqmodel::EncoderConfig enc;

    explicit World(std::vector<int> train_sizes, int d_model = 8) {
        gen.d_in = 5;
        gen.tokens_per_language = 4;
        gen.train_size = 4;  // overridden per language below
        gen.val_size = 2;
        gen.test_size = 2;
        gen.pool_seed = 5;
        for (std::size_t i = 0; i < train_sizes.size(); ++i) {
            auto g = gen;
            g.train_size = train_sizes[i];
            data.push_back(synthlang::make_task_data(
                synthlang::gen_language(g, static_cast<int>(i), 900 + i)));
        }
        enc.d_in = 5;
        enc.d_model = static_cast<std::size_t>(d_model);
        enc.layers = 1;
        enc.regime = seqmodel::TokenRegime::shared;
        enc.global_tokens = gen.union_vocab_size(static_cast<int>(train_sizes.size())) - 1;
    }

    TaskView task(int index, std::vector<int> langs) const {
        TaskView t;
        t.task_index = index;
        for (int l : langs) t.members.push_back(&data[l]);
        return t;
    }

    Model model(int base_langs) const {
        Rng rng(31);
        std::vector<synthlang::TaskSpec> base;
        for (int i = 0; i < base_langs; ++i) base.push_back(data[i].spec);
        return Model(enc, base, rng);
    }
};

}  // namespace

TEST_CASE("agem projection: aligned gradients pass through") {
    std::vector<double> g{1.0, 1.0};
    const std::vector<double> ref{1.0, 0.0};
    const double dot = agem_project(ref, g);
    CHECK(dot == doctest::Approx(1.0));
    CHECK(g == std::vector<double>{1.0, 1.0});
}

TEST_CASE("agem projection: conflicting gradient lands on the constraint surface") {
    std::vector<double> g{1.0, 0.0};
    const std::vector<double> ref{-1.0, 1.0};
    const double dot = agem_project(ref, g);
    CHECK(g[0] == 0.5);
    CHECK(g[1] == 0.5);
    CHECK(dot == 0.0);
}

TEST_CASE("agem projection: zero reference gradient passes through") {
    std::vector<double> g{0.3, -0.7};
    const std::vector<double> ref{0.0, 0.0};
    agem_project(ref, g);
    CHECK(g == std::vector<double>{0.3, -0.7});
}

TEST_CASE("agem projection invariant over random pairs") {
    Rng rng(61);
    for (int rep = 0; rep < 10000; ++rep) {
        std::vector<double> g(8), ref(8);
        for (auto& x : g) x = rng.uniform(-3.0, 3.0);
        for (auto& x : ref) x = rng.uniform(-3.0, 3.0);
        CHECK(agem_project(ref, g) >= -1e-9);
    }
}

TEST_CASE("er mixes the current task with the retained fraction of each past task") {
    World w({500, 500, 100});
    auto model = w.model(1);

    StrategyConfig cfg;
    cfg.kind = StrategyKind::er;
    ExperienceReplay er(cfg);

    const auto t0 = w.task(0, {0});
    const auto t1 = w.task(1, {1});
    const auto t2 = w.task(2, {2});
    er.finalize_task(model, t0, 7);
    er.finalize_task(model, t1, 7);

    const auto plan = er.prepare_task(model, t2, {t0, t1}, 7);
    CHECK(plan.items.size() == 100 + 50 + 50);
    std::size_t replayed = 0;
    for (const auto& item : plan.items) replayed += item.replayed ? 1 : 0;
    CHECK(replayed == 100);

    // Validation mirrors the mixing rule over the val splits.
    CHECK(plan.val.size() == 2 + 2 * static_cast<std::size_t>(std::llround(0.1 * 2)));
}

TEST_CASE("er with ratio one and one past task replays the full union") {
    World w({30, 20});
    auto model = w.model(1);
    StrategyConfig cfg;
    cfg.kind = StrategyKind::er;
    cfg.replay_ratio = 1.0;
    ExperienceReplay er(cfg);

    const auto t0 = w.task(0, {0});
    const auto t1 = w.task(1, {1});
    er.finalize_task(model, t0, 7);
    const auto plan = er.prepare_task(model, t1, {t0}, 7);
    CHECK(plan.items.size() == 50);

    std::set<std::string> ids;
    for (const auto& item : plan.items) ids.insert(item.utt->id);
    CHECK(ids.size() == 50);
}

TEST_CASE("er buffers are deterministic in the run seed") {
    World w({40, 10});
    auto model = w.model(1);
    StrategyConfig cfg;
    cfg.kind = StrategyKind::er;

    auto ids_for = [&](std::uint64_t seed) {
        ExperienceReplay er(cfg);
        er.finalize_task(model, w.task(0, {0}), seed);
        std::vector<std::string> ids;
        for (const auto& e : er.buffer().task_entries(0)) ids.push_back(e.utt->id);
        return ids;
    };
    CHECK(ids_for(7) == ids_for(7));
    CHECK(ids_for(7) != ids_for(8));
    CHECK(ids_for(7).size() == 4);
}

TEST_CASE("er requires every past task to have been finalized") {
    World w({10, 10});
    auto model = w.model(1);
    StrategyConfig cfg;
    cfg.kind = StrategyKind::er;
    ExperienceReplay er(cfg);
    CHECK_THROWS_WITH_AS(er.prepare_task(model, w.task(1, {1}), {w.task(0, {0})}, 7),
                         doctest::Contains("never finalized"), std::runtime_error);
}

TEST_CASE("der records teacher logits at insertion time and they never change") {
    World w({12, 8});
    auto model = w.model(1);
    StrategyConfig cfg;
    cfg.kind = StrategyKind::der;
    DarkExperienceReplay der(cfg);

    const auto t0 = w.task(0, {0});
    der.finalize_task(model, t0, 7);
    const auto& entries = der.buffer().task_entries(0);
    REQUIRE(!entries.empty());
    const auto stored = entries.front().stored_logits;

    // Mutate the model; stored logits must stay frozen.
    for (auto& e : model.params())
        for (auto& v : e.tensor->v) v += 0.5;
    CHECK(der.buffer().task_entries(0).front().stored_logits == stored);

    // Matching student and stored logits contribute a zero distillation term.
    auto fresh_model = w.model(1);
    DarkExperienceReplay fresh(cfg);
    fresh.finalize_task(fresh_model, t0, 7);
    auto plan = fresh.prepare_task(fresh_model, w.task(1, {1}), {t0}, 7);

    Tape tape;
    Batch batch;
    std::vector<const TrainItem*> replayed;
    for (const auto& item : plan.items)
        if (item.replayed) replayed.push_back(&item);
    REQUIRE(!replayed.empty());
    for (const auto* item : replayed) {
        const Model::Sel sel{AdapterKind::none, item->utt->lang};
        auto hidden = fresh_model.encode(&tape, item->utt->features, sel);
        batch.items.push_back(item);
        batch.hidden.push_back(hidden);
        batch.logits.push_back(fresh_model.logits(&tape, hidden, sel));
    }
    auto base = numkit::scalar(3.25);
    auto total = fresh.loss_hook(&tape, base, batch, fresh_model);
    CHECK(total->scalar_value() == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("ewc penalty matches the quadratic form by hand") {
    // omega = [2], theta = [1.5], anchor = [1.0], lambda = 5
    // penalty = (5/2) * 2 * 0.25 = 1.25
    numkit::ParamStore params;
    params.add("p", numkit::tensor_of({1, 1}, {1.5}));
    ImportanceMap map;
    map.omega["p"] = numkit::tensor_of({1, 1}, {2.0});
    map.anchor["p"] = numkit::tensor_of({1, 1}, {1.0});
    Tape tape;
    CHECK(map.penalty(&tape, params, 5.0)->scalar_value() == doctest::Approx(1.25));
}

TEST_CASE("penalty is zero at the anchor and positive wherever importance is positive") {
    numkit::ParamStore params;
    auto p = params.add("p", numkit::tensor_of({1, 3}, {0.5, -1.0, 2.0}));
    ImportanceMap map;
    map.omega["p"] = numkit::tensor_of({1, 3}, {1.0, 2.0, 0.5});
    map.anchor["p"] = numkit::clone(p);
    CHECK(map.penalty(nullptr, params, 3.0)->scalar_value() == 0.0);
    p->v[1] += 0.1;
    CHECK(map.penalty(nullptr, params, 3.0)->scalar_value() > 0.0);
}

TEST_CASE("mas gradient formula on the tape reproduces the analytic value") {
    // f(theta) = theta * x with theta = 3, x = 2: d(f^2)/dtheta = 2*f*x = 24.
    auto theta = numkit::tensor_of({1, 1}, {3.0}, true);
    auto x = numkit::tensor_of({1, 1}, {2.0});
    Tape tape;
    auto f = numkit::mul(&tape, theta, x);
    tape.backward(numkit::sum(&tape, numkit::mul(&tape, f, f)));
    CHECK(std::fabs(theta->g[0]) == doctest::Approx(24.0));
}

TEST_CASE("importance accumulation: first task gives (1 - alpha) times the fresh estimate") {
    World w({6, 6});
    auto model = w.model(1);
    StrategyConfig cfg;
    cfg.kind = StrategyKind::mas;
    MemoryAwareSynapses mas(cfg);

    const auto t0 = w.task(0, {0});
    mas.update_importance(model, t0);
    const auto& map = mas.importance();
    CHECK(map.task_count == 1);

    // Independent recomputation of the fresh estimate: mean |grad| of the
    // squared output norm over the task data.
    std::map<std::string, std::vector<double>> expected;
    for (const auto& e : model.params()) expected[e.name].assign(e.tensor->size(), 0.0);
    const auto pool = t0.train_pool();
    for (const auto* utt : pool) {
        model.params().zero_grads();
        Tape tape;
        auto logits = model.forward(&tape, utt->features, {AdapterKind::none, utt->lang});
        tape.backward(numkit::sum(&tape, numkit::mul(&tape, logits, logits)));
        for (const auto& e : model.params()) {
            if (e.tensor->g.empty()) continue;
            for (std::size_t i = 0; i < e.tensor->g.size(); ++i)
                expected[e.name][i] += std::fabs(e.tensor->g[i]);
        }
    }
    model.params().zero_grads();
    bool any_positive = false;
    for (auto& [name, vals] : expected) {
        const auto& omega = map.omega.at(name);
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double fresh = vals[i] / static_cast<double>(pool.size());
            CHECK(omega->v[i] == doctest::Approx(0.5 * fresh).epsilon(1e-9));
            CHECK(omega->v[i] >= 0.0);
            any_positive = any_positive || omega->v[i] > 0.0;
        }
    }
    CHECK(any_positive);
}

TEST_CASE("ewc importance is the mean squared task-loss gradient") {
    World w({4, 4});
    auto model = w.model(1);
    StrategyConfig cfg;
    cfg.kind = StrategyKind::ewc;
    ElasticWeightConsolidation ewc(cfg);
    const auto t0 = w.task(0, {0});
    ewc.update_importance(model, t0);
    for (const auto& [name, omega] : ewc.importance().omega)
        for (double v : omega->v) CHECK(v >= 0.0);
    CHECK(ewc.importance().task_count == 1);
}

TEST_CASE("a zero-output model has zero importance everywhere") {
    World w({4, 4});
    auto model = w.model(1);
    for (auto& x : model.params().at("head.w")->v) x = 0.0;
    for (auto& x : model.params().at("head.b")->v) x = 0.0;

    StrategyConfig cfg;
    cfg.kind = StrategyKind::mas;
    MemoryAwareSynapses mas(cfg);
    mas.update_importance(model, w.task(0, {0}));
    for (const auto& [name, omega] : mas.importance().omega)
        for (double v : omega->v) CHECK(v == 0.0);
}

TEST_CASE("update_importance rejects non-regularization strategies") {
    World w({4});
    auto model = w.model(1);
    auto ft = make_strategy({});
    CHECK_THROWS_WITH_AS(ft->update_importance(model, w.task(0, {0})),
                         doctest::Contains("not a regularization strategy"),
                         std::runtime_error);
}

TEST_CASE("lwf distillation equals the teacher entropy when the student matches") {
    World w({6, 6});
    auto model = w.model(1);
    StrategyConfig cfg;
    cfg.kind = StrategyKind::lwf;
    LearningWithoutForgetting lwf(cfg);

    const auto t0 = w.task(0, {0});
    const auto t1 = w.task(1, {1});
    lwf.prepare_task(model, t0, {}, 7);
    lwf.finalize_task(model, t0, 7);
    auto plan = lwf.prepare_task(model, t1, {t0}, 7);
    REQUIRE(lwf.has_teacher());

    Tape tape;
    Batch batch;
    const auto* item = &plan.items.front();
    const Model::Sel sel{AdapterKind::none, -1};
    auto hidden = model.encode(&tape, item->utt->features, sel);
    batch.items.push_back(item);
    batch.hidden.push_back(hidden);
    batch.logits.push_back(model.logits(&tape, hidden, sel));

    auto base = numkit::scalar(0.0);
    auto total = lwf.loss_hook(&tape, base, batch, model);

    // Teacher and student are identical here, so the distillation term is the
    // temperature-smoothed entropy of the (shared) output distribution.
    auto logits = model.forward(nullptr, item->utt->features, sel);
    auto probs = numkit::softmax_rows(
        nullptr, numkit::scale(nullptr, logits, 1.0 / cfg.lwf_temperature));
    double entropy = 0.0;
    for (double p : probs->v) entropy -= p > 0.0 ? p * std::log(p) : 0.0;
    entropy /= static_cast<double>(logits->rows());
    CHECK(total->scalar_value() ==
          doctest::Approx(cfg.lwf_lambda * entropy).epsilon(1e-9));
}

TEST_CASE("lwf fails without a teacher snapshot") {
    World w({6, 6});
    auto model = w.model(1);
    StrategyConfig cfg;
    cfg.kind = StrategyKind::lwf;
    LearningWithoutForgetting lwf(cfg);
    // Forged state: pretend we are past the base stage with no teacher.
    const auto t1 = w.task(1, {1});
    CHECK_THROWS_AS(lwf.prepare_task(model, t1, {}, 7), std::runtime_error);
}

TEST_CASE("piggyback starts at the base model: initial mask is all ones") {
    World w({6, 6});
    auto model = w.model(1);
    StrategyConfig cfg;
    cfg.kind = StrategyKind::pb;
    Piggyback pb(cfg);

    const auto t1 = w.task(1, {1});
    pb.prepare_task(model, t1, {w.task(0, {0})}, 7);
    const auto& mask = model.adapters().pb(1);
    CHECK(mask.threshold == 0.005);
    for (const auto& e : mask.real_weights)
        for (double v : e.tensor->v) CHECK(v == 0.01);

    // 0.01 > 0.005 everywhere, so the first forward equals the base model.
    const auto& utt = w.data[1].train.utts.front();
    auto masked_hidden = model.encode(nullptr, utt.features, {AdapterKind::pb, 1});
    auto plain_hidden = model.encode(nullptr, utt.features, {AdapterKind::none, 0});
    CHECK(masked_hidden->v == plain_hidden->v);
}

TEST_CASE("architecture strategies train only their adapter parameters") {
    World w({6, 6});
    auto model = w.model(1);
    StrategyConfig cfg;
    cfg.kind = StrategyKind::pnn;
    ProgressiveColumns pnn(cfg);

    const auto t1 = w.task(1, {1});
    pnn.prepare_task(model, t1, {w.task(0, {0})}, 7);
    numkit::ParamStore train;
    pnn.collect_trainable(model, t1, train);
    CHECK(train.size() > 0);
    std::set<const numkit::Tensor*> trainable;
    for (const auto& e : train) trainable.insert(e.tensor.get());
    for (const auto& e : model.params()) CHECK(trainable.count(e.tensor.get()) == 0);

    // After finalize the adapter itself is frozen.
    pnn.finalize_task(model, t1, 7);
    for (const auto& e : model.adapters().pnn(1).params) CHECK(e.frozen);
}

TEST_CASE("strategy state round-trips through the archive") {
    World w({20, 10});
    auto model = w.model(1);
    const auto dir = std::filesystem::temp_directory_path() / "clseq_strategy_state";
    std::filesystem::create_directories(dir);

    const auto t0 = w.task(0, {0});
    const auto t1 = w.task(1, {1});
    const std::vector<TaskView> tasks{t0, t1};

    SUBCASE("experience replay buffer") {
        StrategyConfig cfg;
        cfg.kind = StrategyKind::er;
        ExperienceReplay er(cfg);
        er.finalize_task(model, t0, 7);
        er.save_state(dir / "er.state");

        ExperienceReplay loaded(cfg);
        loaded.load_state(dir / "er.state", tasks, model);
        REQUIRE(loaded.buffer().has_task(0));
        const auto& a = er.buffer().task_entries(0);
        const auto& b = loaded.buffer().task_entries(0);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].utt->id == b[i].utt->id);
    }

    SUBCASE("der stored logits") {
        StrategyConfig cfg;
        cfg.kind = StrategyKind::der;
        DarkExperienceReplay der(cfg);
        der.finalize_task(model, t0, 7);
        der.save_state(dir / "der.state");

        DarkExperienceReplay loaded(cfg);
        loaded.load_state(dir / "der.state", tasks, model);
        const auto& a = der.buffer().task_entries(0);
        const auto& b = loaded.buffer().task_entries(0);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(a[i].stored_logits == b[i].stored_logits);
    }

    SUBCASE("importance maps") {
        StrategyConfig cfg;
        cfg.kind = StrategyKind::mas;
        MemoryAwareSynapses mas(cfg);
        mas.update_importance(model, t0);
        mas.save_state(dir / "mas.state");

        MemoryAwareSynapses loaded(cfg);
        loaded.load_state(dir / "mas.state", tasks, model);
        CHECK(loaded.importance().task_count == mas.importance().task_count);
        for (const auto& [name, omega] : mas.importance().omega)
            CHECK(loaded.importance().omega.at(name)->v == omega->v);
    }

    SUBCASE("lwf teacher") {
        StrategyConfig cfg;
        cfg.kind = StrategyKind::lwf;
        LearningWithoutForgetting lwf(cfg);
        lwf.prepare_task(model, t0, {}, 7);
        lwf.finalize_task(model, t0, 7);
        lwf.save_state(dir / "lwf.state");

        LearningWithoutForgetting loaded(cfg);
        loaded.load_state(dir / "lwf.state", tasks, model);
        CHECK(loaded.has_teacher());
    }
}
