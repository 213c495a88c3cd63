#include <benchmark/benchmark.h>

#include "clseq/ctcwer/ctc.hpp"
#include "clseq/ctcwer/wer.hpp"
#include "clseq/seqmodel/model.hpp"

using namespace clseq;
using numkit::Rng;
using numkit::Tape;

namespace {

numkit::TensorPtr random_log_probs(Rng& rng, std::size_t time, std::size_t vocab) {
    auto raw = numkit::tensor({time, vocab});
    for (auto& x : raw->v) x = rng.uniform(-2.0, 2.0);
    return numkit::log_softmax_rows(nullptr, raw);
}

void BM_CtcLossForward(benchmark::State& state) {
    const auto time = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    auto lp = random_log_probs(rng, time, 32);
    std::vector<int> target;
    for (std::size_t i = 0; i < time / 3; ++i) target.push_back(1 + static_cast<int>(i % 30));
    for (auto _ : state) benchmark::DoNotOptimize(ctcwer::ctc_loss(nullptr, lp, target));
}
BENCHMARK(BM_CtcLossForward)->Arg(16)->Arg(64)->Arg(256);

void BM_CtcLossBackward(benchmark::State& state) {
    const auto time = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    auto raw = numkit::tensor({time, 32});
    for (auto& x : raw->v) x = rng.uniform(-2.0, 2.0);
    raw->requires_grad = true;
    std::vector<int> target;
    for (std::size_t i = 0; i < time / 3; ++i) target.push_back(1 + static_cast<int>(i % 30));
    for (auto _ : state) {
        raw->zero_grad();
        Tape tape;
        auto lp = numkit::log_softmax_rows(&tape, raw);
        tape.backward(ctcwer::ctc_loss(&tape, lp, target));
        benchmark::DoNotOptimize(raw->g.data());
    }
}
BENCHMARK(BM_CtcLossBackward)->Arg(16)->Arg(64);

void BM_EditDistance(benchmark::State& state) {
    const auto len = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    std::vector<int> ref(len), hyp(len + len / 4);
    for (auto& x : ref) x = rng.uniform_int(1, 30);
    for (auto& x : hyp) x = rng.uniform_int(1, 30);
    for (auto _ : state) benchmark::DoNotOptimize(ctcwer::edit_distance(ref, hyp));
}
BENCHMARK(BM_EditDistance)->Arg(16)->Arg(128)->Arg(1024);

void BM_EncoderForwardBackward(benchmark::State& state) {
    const auto d_model = static_cast<std::size_t>(state.range(0));
    synthlang::GeneratorConfig gen;
    gen.d_in = 8;
    gen.tokens_per_language = 8;
    gen.train_size = 1;
    gen.val_size = 1;
    gen.test_size = 1;
    const auto spec = synthlang::gen_language(gen, 0, 3);
    seqmodel::EncoderConfig enc{8, d_model, 1, seqmodel::TokenRegime::shared,
                                gen.union_vocab_size(1) - 1};
    Rng rng(5);
    seqmodel::Model model(enc, {spec}, rng);
    Rng utt_rng(7);
    const auto utt = synthlang::sample_utterance(spec, utt_rng);
    const seqmodel::Model::Sel sel{seqmodel::AdapterKind::none, 0};
    for (auto _ : state) {
        model.params().zero_grads();
        Tape tape;
        auto lp = numkit::log_softmax_rows(&tape, model.forward(&tape, utt.features, sel));
        tape.backward(ctcwer::ctc_loss(&tape, lp, model.to_local_targets(utt.tokens, sel)));
        benchmark::DoNotOptimize(model.params().at("head.w")->g.data());
    }
}
BENCHMARK(BM_EncoderForwardBackward)->Arg(32)->Arg(64)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
