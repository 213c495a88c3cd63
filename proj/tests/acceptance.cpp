// Acceptance suite: end-to-end checks of the benchmark against its
// published aggregates, closed-form oracles, and directional findings.
// Each criterion prints one PASS/FAIL line; run with a criterion number to
// execute just that one, or with no arguments for the full battery.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "clseq/clbench/harness.hpp"
#include "clseq/ctcwer/ctc.hpp"
#include "clseq/error.hpp"
#include "clseq/strategies/rehearsal.hpp"
#include "support/gradient_check.hpp"
#include "support/oracles.hpp"
#include "support/reference_tables.hpp"

using namespace clseq;
using namespace clseq::clbench;
using numkit::Rng;
using numkit::Tape;
using numkit::TensorPtr;

#ifndef CLSEQ_CONFIG_DIR
#error "CLSEQ_CONFIG_DIR must point at the configs directory"
#endif

namespace {

struct Failure {
    std::string detail;
};

void require(bool ok, const std::string& detail) {
    if (!ok) throw Failure{detail};
}

std::string config_path(const char* name) {
    return std::string(CLSEQ_CONFIG_DIR) + "/" + name;
}

ExperimentConfig suite_config() {
    return ExperimentConfig::from_file(config_path("suite_small.ini"));
}

const std::vector<std::uint64_t> kPublishedSeeds{20250, 7, 99};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// --------------------------------------------------------------------------
// 1. The column-mean aggregator reproduces every published average row.
void criterion_1() {
    const auto& columns = testing::reference_columns();
    require(columns.size() >= 84, "expected the full set of published columns");
    for (const auto& col : columns) {
        const double mean = column_mean(col.values);
        require(std::fabs(mean - col.published_average) <= 0.01,
                cat(col.model, "/", col.metric, "/", col.strategy, ": mean ", mean,
                    " vs published ", col.published_average));
        if (col.metric == "bwt" &&
            (col.strategy == "pnn" || col.strategy == "pb" || col.strategy == "l2p"))
            require(mean == 0.0, "architecture rows must aggregate to exactly zero");
    }
}

// --------------------------------------------------------------------------
// 2. CTC matches brute-force path enumeration and finite differences on
//    every tiny instance.
void criterion_2() {
    Rng rng(2026);
    for (std::size_t time = 1; time <= 4; ++time) {
        for (std::size_t vocab = 2; vocab <= 3; ++vocab) {
            for (int draw = 0; draw < 4; ++draw) {
                auto raw = numkit::tensor({time, vocab});
                for (auto& x : raw->v) x = rng.uniform(-2.0, 2.0);
                auto lp = numkit::log_softmax_rows(nullptr, raw);

                std::vector<std::vector<int>> targets{{}};
                for (int a = 1; a < static_cast<int>(vocab); ++a) {
                    targets.push_back({a});
                    for (int b = 1; b < static_cast<int>(vocab); ++b)
                        targets.push_back({a, b});
                }
                for (const auto& target : targets) {
                    if (!ctcwer::ctc_feasible(time, target)) continue;
                    const double expect = testing::brute_force_ctc_nll(*lp, target);
                    const double got = ctcwer::ctc_loss(nullptr, lp, target)->scalar_value();
                    require(std::fabs(got - expect) <= 1e-6 * std::max(1.0, std::fabs(expect)),
                            cat("ctc loss ", got, " vs enumeration ", expect, " (T=", time,
                                ", V=", vocab, ")"));
                    const double err = testing::max_grad_error(
                        [&](Tape* t) { return ctcwer::ctc_loss(t, raw, target); }, {raw});
                    require(err < 1e-4, cat("ctc gradient error ", err));
                }
            }
        }
    }
}

// --------------------------------------------------------------------------
// 3. Every differentiable primitive and the full model loss pass
//    finite-difference checks on >= 20 random instances each.
void criterion_3() {
    Rng rng(3033);
    auto rand_t = [&](std::size_t r, std::size_t c) {
        auto t = numkit::tensor({r, c});
        for (auto& x : t->v) x = rng.uniform(-2.0, 2.0);
        return t;
    };
    using Builder = std::function<TensorPtr(Tape*)>;
    for (int rep = 0; rep < 20; ++rep) {
        auto a = rand_t(3, 4), b = rand_t(3, 4), m = rand_t(4, 3), row = rand_t(1, 4);
        const std::vector<std::pair<const char*, std::pair<Builder, std::vector<TensorPtr>>>>
            cases{
                {"matmul", {[&](Tape* t) { return numkit::sum(t, numkit::matmul(t, a, m)); },
                            {a, m}}},
                {"add", {[&](Tape* t) { return numkit::sum(t, numkit::add(t, a, b)); }, {a, b}}},
                {"sub", {[&](Tape* t) { return numkit::sum(t, numkit::sub(t, a, b)); }, {a, b}}},
                {"mul", {[&](Tape* t) { return numkit::sum(t, numkit::mul(t, a, b)); }, {a, b}}},
                {"scale",
                 {[&](Tape* t) { return numkit::sum(t, numkit::scale(t, a, 0.37)); }, {a}}},
                {"add_rowwise",
                 {[&](Tape* t) { return numkit::sum(t, numkit::add_rowwise(t, a, row)); },
                  {a, row}}},
                {"add_column_broadcast",
                 {[&](Tape* t) {
                      return numkit::sum(t, numkit::add_column_broadcast(t, a, m, 2));
                  },
                  {a, m}}},
                {"tanh", {[&](Tape* t) { return numkit::sum(t, numkit::tanh(t, a)); }, {a}}},
                {"sigmoid",
                 {[&](Tape* t) { return numkit::sum(t, numkit::sigmoid(t, a)); }, {a}}},
                {"softmax",
                 {[&](Tape* t) {
                      return numkit::sum(t, numkit::mul(t, numkit::softmax_rows(t, a), b));
                  },
                  {a, b}}},
                {"log_softmax",
                 {[&](Tape* t) {
                      return numkit::sum(t, numkit::mul(t, numkit::log_softmax_rows(t, a), b));
                  },
                  {a, b}}},
                {"sum", {[&](Tape* t) { return numkit::sum(t, a); }, {a}}},
                {"mean", {[&](Tape* t) { return numkit::mean(t, a); }, {a}}},
                {"concat_rows",
                 {[&](Tape* t) {
                      return numkit::sum(t, numkit::mul(t, numkit::concat_rows(t, {a, b}),
                                                        numkit::concat_rows(t, {b, a})));
                  },
                  {a, b}}},
                {"slice_rows",
                 {[&](Tape* t) { return numkit::sum(t, numkit::slice_rows(t, a, 1, 3)); },
                  {a}}},
                {"slice_cols",
                 {[&](Tape* t) { return numkit::sum(t, numkit::slice_cols(t, a, 1, 4)); },
                  {a}}},
            };
        for (const auto& [name, c] : cases) {
            const double err = testing::max_grad_error(c.first, c.second);
            require(err < 1e-4, cat(name, ": gradient error ", err));
        }
    }

    // Full model loss: every parameter of a small model against central
    // differences, on 20 random utterances.
    synthlang::GeneratorConfig gen;
    gen.d_in = 4;
    gen.tokens_per_language = 4;
    gen.train_size = 1;
    gen.val_size = 1;
    gen.test_size = 1;
    gen.pool_seed = 9;
    const auto spec = synthlang::gen_language(gen, 0, 303);
    seqmodel::EncoderConfig enc;
    enc.d_in = 4;
    enc.d_model = 6;
    enc.layers = 1;
    enc.regime = seqmodel::TokenRegime::shared;
    enc.global_tokens = gen.union_vocab_size(1) - 1;
    Rng model_rng(7);
    seqmodel::Model model(enc, {spec}, model_rng);

    std::vector<TensorPtr> params;
    for (const auto& e : model.params()) params.push_back(e.tensor);
    Rng utt_rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const auto utt = synthlang::sample_utterance(spec, utt_rng);
        const seqmodel::Model::Sel sel{seqmodel::AdapterKind::none, 0};
        auto build = [&](Tape* t) {
            auto lp = numkit::log_softmax_rows(t, model.forward(t, utt.features, sel));
            return ctcwer::ctc_loss(t, lp, model.to_local_targets(utt.tokens, sel));
        };
        const double err = testing::max_grad_error(build, params);
        require(err < 1e-4, cat("model loss gradient error ", err));
    }
}

// --------------------------------------------------------------------------
// 4. A-GEM: the projected gradient never conflicts with the reference, over
//    random pairs and over every step of a real seeded run.
void criterion_4() {
    // Hand example is exact.
    std::vector<double> g{1.0, 0.0};
    strategies::agem_project(std::vector<double>{-1.0, 1.0}, g);
    require(g[0] == 0.5 && g[1] == 0.5, "hand projection example must be exact");

    Rng rng(4044);
    for (int rep = 0; rep < 10000; ++rep) {
        std::vector<double> grad(16), ref(16);
        for (auto& x : grad) x = rng.uniform(-5.0, 5.0);
        for (auto& x : ref) x = rng.uniform(-5.0, 5.0);
        const double dot = strategies::agem_project(ref, grad);
        require(dot >= -1e-9, cat("random pair dot ", dot));
    }

    auto cfg = suite_config();
    cfg.new_languages = 3;
    cfg.strategy.kind = strategies::StrategyKind::agem;
    const auto result = run_sequence(cfg);
    require(!result.agem_dots.empty(), "seeded run produced no projection diagnostics");
    for (double dot : result.agem_dots)
        require(dot >= -1e-9, cat("real run dot ", dot));
}

// --------------------------------------------------------------------------
// 5. Architecture methods forget nothing, bitwise.
void criterion_5() {
    auto cfg = suite_config();
    cfg.new_languages = 3;
    RunCache cache;
    for (auto kind : {strategies::StrategyKind::pnn, strategies::StrategyKind::pb,
                      strategies::StrategyKind::l2p}) {
        cfg.strategy.kind = kind;
        const auto result = run_sequence(cfg, {}, nullptr, &cache);
        const auto& m = result.record.matrix;
        require(m.tasks() == 4, "expected base + three languages");
        for (int t = 2; t <= m.tasks(); ++t) {
            for (int j = 1; j < t; ++j)
                require(m.at(t, j) == m.at(j, j),
                        cat(strategies::strategy_name(kind), ": WER(", t, ",", j,
                            ") deviates from WER(", j, ",", j, ")"));
            require(bwt(m, t) == 0.0,
                    cat(strategies::strategy_name(kind), ": BWT at stage ", t, " not zero"));
        }
    }
}

// --------------------------------------------------------------------------
// 6. Replay beats plain fine-tuning in every published seed, and plain
//    fine-tuning forgets catastrophically.
void criterion_6() {
    for (const auto seed : kPublishedSeeds) {
        auto cfg = suite_config();
        cfg.seed = seed;
        cfg.gen.pool_seed = numkit::mix_seed(seed, "pool");
        RunCache cache;

        cfg.strategy.kind = strategies::StrategyKind::ft;
        const auto ft = run_sequence(cfg, {}, nullptr, &cache);
        cfg.strategy.kind = strategies::StrategyKind::er;
        const auto er = run_sequence(cfg, {}, nullptr, &cache);

        const double ft_awer = ft.record.metrics.awer.back();
        const double er_awer = er.record.metrics.awer.back();
        const double ft_bwt = ft.record.metrics.bwt.back();
        const double er_bwt = er.record.metrics.bwt.back();
        require(er_awer < ft_awer,
                cat("seed ", seed, ": final AWER er ", er_awer, " !< ft ", ft_awer));
        require(er_bwt > ft_bwt,
                cat("seed ", seed, ": final BWT er ", er_bwt, " !> ft ", ft_bwt));
        require(ft.record.metrics.bwt.front() < -5.0,
                cat("seed ", seed, ": FT BWT_2 ", ft.record.metrics.bwt.front(),
                    " shows no catastrophic forgetting"));
    }
}

// --------------------------------------------------------------------------
// 7. Replay reduces ordering sensitivity: the spread of the final AWER over
//    ten random orders is strictly smaller than plain fine-tuning's.
void criterion_7() {
    auto cfg = suite_config();
    cfg.strategy.kind = strategies::StrategyKind::ft;
    const auto ft = ordering_study(cfg, 10, 1);
    cfg.strategy.kind = strategies::StrategyKind::er;
    const auto er = ordering_study(cfg, 10, 1);
    const double ft_std = ft.awer.stddev.back();
    const double er_std = er.awer.stddev.back();
    require(er_std < ft_std,
            cat("final AWER spread: er ", er_std, " !< ft ", ft_std));
}

// --------------------------------------------------------------------------
// 8. Budget imbalance drives the first-stage forgetting drop, and replay
//    shrinks the drop under both budgets.
void criterion_8() {
    const auto cfg = ExperimentConfig::from_file(config_path("imbalance.ini"));
    const auto summary = imbalance_study(cfg);
    const double ft_imb = summary.entry("ft", "imbalanced").drop_magnitude();
    const double ft_bal = summary.entry("ft", "balanced").drop_magnitude();
    const double er_imb = summary.entry("er", "imbalanced").drop_magnitude();
    const double er_bal = summary.entry("er", "balanced").drop_magnitude();
    require(ft_imb > ft_bal,
            cat("FT drop: imbalanced ", ft_imb, " !> balanced ", ft_bal));
    require(er_imb <= ft_imb,
            cat("imbalanced drop: er ", er_imb, " !<= ft ", ft_imb));
    require(er_bal <= ft_bal, cat("balanced drop: er ", er_bal, " !<= ft ", ft_bal));
}

// --------------------------------------------------------------------------
// 9. Determinism and persistence: identical runs reproduce the stored matrix
//    byte for byte, and metrics recompute from it to within 1e-9.
void criterion_9() {
    const auto cfg = suite_config();
    const auto dir1 = std::filesystem::temp_directory_path() / "clseq_accept_det1";
    const auto dir2 = std::filesystem::temp_directory_path() / "clseq_accept_det2";
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
    const auto r1 = run_sequence(cfg, dir1);
    run_sequence(cfg, dir2);

    const auto bytes1 = slurp(dir1 / "wer_matrix.csv");
    require(!bytes1.empty(), "missing wer_matrix.csv");
    require(bytes1 == slurp(dir2 / "wer_matrix.csv"),
            "re-running with identical config and seeds changed wer_matrix.csv");

    const auto matrix = parse_wer_matrix_csv(bytes1);
    const auto series = compute_series(matrix, nullptr);
    require(series.awer.size() == r1.record.metrics.awer.size(), "metric series length");
    for (std::size_t i = 0; i < series.awer.size(); ++i)
        require(std::fabs(series.awer[i] - r1.record.metrics.awer[i]) <= 1e-9,
                cat("awer recompute mismatch at stage ", i + 1));
    for (std::size_t i = 0; i < series.bwt.size(); ++i)
        require(std::fabs(series.bwt[i] - r1.record.metrics.bwt[i]) <= 1e-9,
                cat("bwt recompute mismatch at stage ", i + 2));
}

// --------------------------------------------------------------------------
// 10. Replay composition is exact.
void criterion_10() {
    synthlang::GeneratorConfig gen;
    gen.d_in = 6;
    gen.tokens_per_language = 5;
    gen.val_size = 2;
    gen.test_size = 2;
    gen.pool_seed = 10;

    std::vector<synthlang::TaskData> data;
    for (int lang = 0; lang < 3; ++lang) {
        auto g = gen;
        g.train_size = lang == 2 ? 100 : 500;
        data.push_back(synthlang::make_task_data(synthlang::gen_language(g, lang, 40 + lang)));
    }
    seqmodel::EncoderConfig enc;
    enc.d_in = 6;
    enc.d_model = 8;
    enc.layers = 1;
    enc.regime = seqmodel::TokenRegime::shared;
    enc.global_tokens = gen.union_vocab_size(3) - 1;
    Rng rng(1);
    seqmodel::Model model(enc, {data[0].spec}, rng);

    auto view = [&](int index, int lang) {
        strategies::TaskView t;
        t.task_index = index;
        t.members.push_back(&data[lang]);
        return t;
    };

    strategies::StrategyConfig er_cfg;
    er_cfg.kind = strategies::StrategyKind::er;
    strategies::ExperienceReplay er(er_cfg);
    er.finalize_task(model, view(0, 0), 7);
    er.finalize_task(model, view(1, 1), 7);
    auto plan = er.prepare_task(model, view(2, 2), {view(0, 0), view(1, 1)}, 7);
    require(plan.items.size() == 100 + 50 + 50,
            cat("ratio 0.10 over {500, 500}: got ", plan.items.size(), " items"));

    er_cfg.replay_ratio = 1.0;
    strategies::ExperienceReplay full(er_cfg);
    full.finalize_task(model, view(0, 0), 7);
    full.finalize_task(model, view(1, 1), 7);
    auto union_plan = full.prepare_task(model, view(2, 2), {view(0, 0), view(1, 1)}, 7);
    require(union_plan.items.size() == 100 + 500 + 500,
            cat("ratio 1.0 must replay the full union: got ", union_plan.items.size()));
}

struct Criterion {
    int number;
    const char* label;
    void (*fn)();
};

const Criterion kCriteria[] = {
    {1, "metric aggregation matches every published average row (+/- 0.01)", criterion_1},
    {2, "ctc equals brute-force enumeration and finite differences", criterion_2},
    {3, "gradient suite: all primitives and the full model loss", criterion_3},
    {4, "a-gem projection never conflicts with the reference gradient", criterion_4},
    {5, "pnn/pb/l2p: zero forgetting, bitwise", criterion_5},
    {6, "replay beats fine-tuning; fine-tuning forgets catastrophically", criterion_6},
    {7, "replay reduces ordering sensitivity over ten orders", criterion_7},
    {8, "budget imbalance drives the first-stage drop; replay shrinks it", criterion_8},
    {9, "byte-identical reruns and 1e-9 metric recomputation", criterion_9},
    {10, "replay composition counts are exact", criterion_10},
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    if (argc > 1) only = std::atoi(argv[1]);

    int failures = 0;
    for (const auto& c : kCriteria) {
        if (only != 0 && c.number != only) continue;
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            c.fn();
        } catch (const Failure& f) {
            ok = false;
            detail = f.detail;
        } catch (const std::exception& e) {
            ok = false;
            detail = e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] criterion %2d: %s (%.1fs)\n", ok ? "PASS" : "FAIL", c.number,
                    c.label, secs);
        if (!ok) {
            std::printf("       %s\n", detail.c_str());
            ++failures;
        }
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
