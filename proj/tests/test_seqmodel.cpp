#include <doctest.h>

#include "clseq/seqmodel/model.hpp"
#include "support/gradient_check.hpp"

using namespace clseq;
using namespace clseq::seqmodel;
using numkit::Rng;
using numkit::TensorPtr;

namespace {

synthlang::GeneratorConfig gen_config() {
    synthlang::GeneratorConfig cfg;
    cfg.d_in = 5;
    cfg.tokens_per_language = 4;
    cfg.train_size = 4;
    cfg.val_size = 2;
    cfg.test_size = 2;
    cfg.pool_seed = 3;
    return cfg;
}

struct Fixture {
    synthlang::GeneratorConfig gen = gen_config();
    std::vector<synthlang::TaskSpec> specs;
    EncoderConfig enc;

    explicit Fixture(TokenRegime regime, int languages = 3) {
        for (int i = 0; i < languages; ++i)
            specs.push_back(synthlang::gen_language(gen, i, 100 + i));
        enc.d_in = 5;
        enc.d_model = 8;
        enc.layers = 1;
        enc.regime = regime;
        enc.global_tokens = gen.union_vocab_size(languages) - 1;
    }

    Model make_model(int base_count = 2) const {
        Rng rng(42);
        std::vector<synthlang::TaskSpec> base(specs.begin(), specs.begin() + base_count);
        return Model(enc, base, rng);
    }

    synthlang::Utterance utterance(int lang, std::uint64_t seed = 5) const {
        Rng rng(seed);
        return synthlang::sample_utterance(specs[lang], rng);
    }
};

}  // namespace

TEST_CASE("encode rejects empty and mismatched features") {
    Fixture fx(TokenRegime::shared);
    auto model = fx.make_model();
    CHECK_THROWS_AS(numkit::tensor({0, 5}), std::runtime_error);
    auto wrong = numkit::tensor({4, 3});
    CHECK_THROWS_AS(model.encode(nullptr, wrong, {AdapterKind::none, 0}), std::runtime_error);
}

TEST_CASE("identity prompt reproduces the unprompted encoding bitwise") {
    Fixture fx(TokenRegime::shared);
    auto model = fx.make_model();
    const auto utt = fx.utterance(2);

    Rng rng(7);
    auto& entry = model.create_prompt(2, fx.specs[2], rng);
    auto prompt = entry.params.at("prompt");
    for (std::size_t i = 0; i < prompt->rows(); ++i)
        for (std::size_t j = 0; j < prompt->cols(); ++j)
            prompt->at(i, j) = i == j ? 1.0 : 0.0;

    const auto plain = model.encode(nullptr, utt.features, {AdapterKind::none, 2});
    const auto prompted = model.encode(nullptr, utt.features, {AdapterKind::l2p, 2});
    CHECK(prompted->v == plain->v);
}

TEST_CASE("all-ones mask reproduces the unmasked forward bitwise") {
    Fixture fx(TokenRegime::shared);
    auto model = fx.make_model();
    const auto utt = fx.utterance(2);

    Rng rng(7);
    model.create_piggyback(2, fx.specs[2], 0.01, 0.005, rng);  // init above threshold
    const auto masked = model.forward(nullptr, utt.features, {AdapterKind::pb, 2});
    // The unadapted forward needs a language column; compare encodings plus
    // the head product directly instead.
    const auto h_plain = model.encode(nullptr, utt.features, {AdapterKind::none, 0});
    const auto h_masked = model.encode(nullptr, utt.features, {AdapterKind::pb, 2});
    CHECK(h_masked->v == h_plain->v);
    const auto plain_logits = numkit::add_rowwise(
        nullptr, numkit::matmul(nullptr, h_plain, model.params().at("head.w")),
        model.params().at("head.b"));
    CHECK(masked->v == plain_logits->v);
}

TEST_CASE("unknown adapter task id fails") {
    Fixture fx(TokenRegime::shared);
    auto model = fx.make_model();
    const auto utt = fx.utterance(0);
    CHECK_THROWS_WITH_AS(model.encode(nullptr, utt.features, {AdapterKind::pnn, 9}),
                         doctest::Contains("no pnn state for task 9"), std::runtime_error);
}

TEST_CASE("hand-set head weights give hand-computed logits") {
    Fixture fx(TokenRegime::shared);
    EncoderConfig enc = fx.enc;
    enc.d_model = 2;
    Rng rng(1);
    Model model(enc, {fx.specs[0], fx.specs[1]}, rng);

    auto w = model.params().at("head.w");
    auto b = model.params().at("head.b");
    for (auto& x : w->v) x = 0.0;
    w->at(0, 1) = 2.0;  // hidden[0] drives token 1
    w->at(1, 2) = -1.0;
    for (auto& x : b->v) x = 0.0;

    auto hidden = numkit::tensor_of({1, 2}, {3.0, 4.0});
    // Unconditioned head application (no language column added).
    auto logits = model.logits(nullptr, hidden, {AdapterKind::none, -1});
    CHECK(logits->at(0, 1) == doctest::Approx(6.0));
    CHECK(logits->at(0, 2) == doctest::Approx(-4.0));
    CHECK(logits->at(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("zero hidden and zero bias give uniform softmax") {
    Fixture fx(TokenRegime::shared);
    auto model = fx.make_model();
    auto b = model.params().at("head.b");
    for (auto& x : b->v) x = 0.0;
    auto hidden = numkit::tensor({3, 8});
    auto logits = model.logits(nullptr, hidden, {AdapterKind::none, -1});
    auto probs = numkit::softmax_rows(nullptr, logits);
    const double uniform = 1.0 / static_cast<double>(logits->cols());
    for (double p : probs->v) CHECK(p == doctest::Approx(uniform));
}

TEST_CASE("language tokens grow the shared head and are forced at evaluation") {
    Fixture fx(TokenRegime::shared);
    auto model = fx.make_model(2);
    const auto before = model.head_vocab_size();

    Rng rng(9);
    model.add_language_token(2, rng);
    CHECK(model.head_vocab_size() == before + 1);
    CHECK(model.language_registered(2));
    CHECK_THROWS_WITH_AS(model.add_language_token(2, rng), doctest::Contains("already"),
                         std::runtime_error);

    // Forcing the token selects the registered column: conditioning changes
    // with the language.
    const auto utt = fx.utterance(2);
    auto l2 = model.forward(nullptr, utt.features, {AdapterKind::none, 2});
    auto l0 = model.forward(nullptr, utt.features, {AdapterKind::none, 0});
    CHECK(l2->v != l0->v);

    // Unregistered language at evaluation is an error.
    CHECK_THROWS_AS(model.forward(nullptr, utt.features, {AdapterKind::none, 7}),
                    std::runtime_error);
}

TEST_CASE("per-language regime rejects language tokens and uses per-task heads") {
    Fixture fx(TokenRegime::per_language);
    auto model = fx.make_model(2);
    Rng rng(9);
    CHECK_THROWS_WITH_AS(model.add_language_token(2, rng),
                         doctest::Contains("shared-token regime"), std::runtime_error);

    model.add_task_head(fx.specs[2], rng);
    CHECK(model.language_registered(2));
    const auto utt = fx.utterance(2);
    auto logits = model.forward(nullptr, utt.features, {AdapterKind::none, 2});
    CHECK(logits->cols() == fx.specs[2].vocab.size() + 1);

    // Base languages route to the base head spanning their vocabulary union.
    const auto base_utt = fx.utterance(0);
    auto base_logits = model.forward(nullptr, base_utt.features, {AdapterKind::none, 0});
    CHECK(base_logits->cols() > fx.specs[0].vocab.size());
}

TEST_CASE("target mapping rejects tokens outside the selected head") {
    Fixture fx(TokenRegime::per_language);
    auto model = fx.make_model(2);
    Rng rng(9);
    model.add_task_head(fx.specs[2], rng);
    ctcwer::TokenSeq alien{{fx.specs[2].vocab.front()}, 0};
    CHECK_THROWS_WITH_AS(model.to_local_targets(alien, {AdapterKind::none, 0}),
                         doctest::Contains("not in the selected head"), std::runtime_error);
}

TEST_CASE("snapshot and restore round-trip the whole model including adapters") {
    Fixture fx(TokenRegime::shared);
    auto model = fx.make_model(2);
    Rng rng(11);
    model.add_language_token(2, rng);
    model.create_pnn_column(2, fx.specs[2], rng);
    model.create_piggyback(2, fx.specs[2], 0.01, 0.005, rng);
    model.create_prompt(2, fx.specs[2], rng);

    const auto ckpt = model.snapshot_all();
    auto clone = Model::skeleton(fx.enc);
    clone.restore_all(ckpt);

    const auto utt = fx.utterance(2);
    for (auto sel : {Model::Sel{AdapterKind::none, 2}, Model::Sel{AdapterKind::pnn, 2},
                     Model::Sel{AdapterKind::pb, 2}, Model::Sel{AdapterKind::l2p, 2}}) {
        auto a = model.forward(nullptr, utt.features, sel);
        auto b = clone.forward(nullptr, utt.features, sel);
        CHECK(a->v == b->v);
    }

    // Restoring into a model of a different width fails.
    EncoderConfig other = fx.enc;
    other.d_model = 16;
    auto wrong = Model::skeleton(other);
    CHECK_THROWS_WITH_AS(wrong.restore_all(ckpt), doctest::Contains("different model"),
                         std::runtime_error);
}

TEST_CASE("teacher snapshots are unaffected by later training") {
    Fixture fx(TokenRegime::shared);
    auto model = fx.make_model(2);
    const auto utt = fx.utterance(0);
    auto teacher = model.clone();
    const auto before = teacher.forward(nullptr, utt.features, {AdapterKind::none, 0})->v;

    // Mutate the live model as a training step would.
    for (auto& e : model.params())
        for (auto& v : e.tensor->v) v += 0.25;

    const auto after = teacher.forward(nullptr, utt.features, {AdapterKind::none, 0})->v;
    CHECK(before == after);
}

TEST_CASE("frozen base with an adapter is independent of later tasks") {
    Fixture fx(TokenRegime::shared);
    auto model = fx.make_model(2);
    Rng rng(13);
    model.create_piggyback(2, fx.specs[2], 0.01, 0.005, rng);
    const auto utt = fx.utterance(2);
    const auto before = model.forward(nullptr, utt.features, {AdapterKind::pb, 2})->v;

    // "Learning another task" under an architecture method touches only that
    // task's adapter parameters.
    auto& other = model.create_prompt(1, fx.specs[1], rng);
    for (auto& x : other.params.at("prompt")->v) x += 0.5;

    CHECK(model.forward(nullptr, utt.features, {AdapterKind::pb, 2})->v == before);
}

TEST_CASE("mask gradients reach the real-valued weights through the model") {
    Fixture fx(TokenRegime::shared);
    auto model = fx.make_model(2);
    Rng rng(17);
    auto& pb = model.create_piggyback(2, fx.specs[2], 0.01, 0.005, rng);
    const auto utt = fx.utterance(2);

    numkit::Tape tape;
    auto logits = model.forward(&tape, utt.features, {AdapterKind::pb, 2});
    tape.backward(numkit::mean(&tape, logits));
    bool any = false;
    for (const auto& e : pb.real_weights)
        if (!e.tensor->g.empty())
            for (double g : e.tensor->g) any = any || g != 0.0;
    CHECK(any);
}
