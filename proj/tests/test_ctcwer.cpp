#include <doctest.h>

#include <cmath>

#include "clseq/ctcwer/ctc.hpp"
#include "clseq/ctcwer/decode.hpp"
#include "clseq/ctcwer/wer.hpp"
#include "clseq/numkit/random.hpp"
#include "support/gradient_check.hpp"
#include "support/oracles.hpp"

using namespace clseq;
using namespace clseq::ctcwer;
using numkit::Rng;
using numkit::Tape;
using numkit::TensorPtr;

namespace {

TensorPtr uniform_log_probs(std::size_t time, std::size_t vocab) {
    return numkit::tensor({time, vocab}, std::log(1.0 / static_cast<double>(vocab)));
}

TensorPtr random_log_probs(Rng& rng, std::size_t time, std::size_t vocab) {
    auto raw = numkit::tensor({time, vocab});
    for (auto& x : raw->v) x = rng.uniform(-2.0, 2.0);
    return numkit::log_softmax_rows(nullptr, raw);
}

std::vector<std::vector<int>> targets_up_to_len2(int vocab) {
    std::vector<std::vector<int>> out{{}};
    for (int a = 1; a < vocab; ++a) {
        out.push_back({a});
        for (int b = 1; b < vocab; ++b) out.push_back({a, b});
    }
    return out;
}

}  // namespace

TEST_CASE("single-frame single-token loss equals the one valid path") {
    auto lp = uniform_log_probs(1, 2);
    auto loss = ctc_loss(nullptr, lp, {1});
    CHECK(loss->scalar_value() == doctest::Approx(-std::log(0.5)).epsilon(1e-9));
}

TEST_CASE("two frames, one token: three valid paths total 3/4") {
    auto lp = uniform_log_probs(2, 2);
    auto loss = ctc_loss(nullptr, lp, {1});
    CHECK(loss->scalar_value() == doctest::Approx(-std::log(0.75)).epsilon(1e-9));
}

TEST_CASE("repeated token needs a separating blank") {
    auto lp = uniform_log_probs(2, 2);
    CHECK_THROWS_WITH_AS(ctc_loss(nullptr, lp, {1, 1}),
                         doctest::Contains("cannot be aligned"), std::runtime_error);
    CHECK(ctc_feasible(3, {1, 1}));
    CHECK_FALSE(ctc_feasible(2, {1, 1}));
}

TEST_CASE("ctc loss equals brute-force path enumeration on all tiny instances") {
    Rng rng(17);
    for (std::size_t time = 1; time <= 4; ++time) {
        for (std::size_t vocab = 2; vocab <= 3; ++vocab) {
            auto lp = random_log_probs(rng, time, vocab);
            for (const auto& target : targets_up_to_len2(static_cast<int>(vocab))) {
                if (!ctc_feasible(time, target)) {
                    CHECK_THROWS_AS(ctc_loss(nullptr, lp, target), std::runtime_error);
                    continue;
                }
                const double expect = testing::brute_force_ctc_nll(*lp, target);
                const double got = ctc_loss(nullptr, lp, target)->scalar_value();
                CHECK(got == doctest::Approx(expect).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("ctc gradient matches finite differences") {
    Rng rng(29);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t time = 2 + rep % 3;
        const std::size_t vocab = 3;
        auto raw = numkit::tensor({time, vocab});
        for (auto& x : raw->v) x = rng.uniform(-2.0, 2.0);
        const std::vector<int> target = (time >= 2 && rep % 2 == 0)
                                            ? std::vector<int>{1, 2}
                                            : std::vector<int>{2};

        // Through the log-softmax, as used in training.
        auto composed = [&](Tape* t) {
            return ctc_loss(t, numkit::log_softmax_rows(t, raw), target);
        };
        CHECK(testing::max_grad_error(composed, {raw}) < 1e-4);

        // Raw log score matrix as the free input.
        auto direct = [&](Tape* t) { return ctc_loss(t, raw, target); };
        CHECK(testing::max_grad_error(direct, {raw}) < 1e-4);
    }
}

TEST_CASE("greedy decode collapses repeats then strips blanks") {
    // frame argmax sequence a a _ a  ->  a a
    auto lp = numkit::tensor_of({4, 2},
                                {0.1, 0.9,   //
                                 0.1, 0.9,   //
                                 0.9, 0.1,   //
                                 0.1, 0.9});
    CHECK(greedy_decode(*lp) == std::vector<int>{1, 1});

    auto blanks = numkit::tensor_of({3, 2}, {0.9, 0.1, 0.9, 0.1, 0.9, 0.1});
    CHECK(greedy_decode(*blanks).empty());

    // frame argmaxes a b b _ b: adjacent repeats merge first -> a b b
    auto lp3 = numkit::tensor_of({5, 3},
                                 {0.0, 1.0, 0.0,   //
                                  0.0, 0.0, 1.0,   //
                                  0.0, 0.0, 1.0,   //
                                  1.0, 0.0, 0.0,   //
                                  0.0, 0.0, 1.0});
    CHECK(greedy_decode(*lp3) == std::vector<int>{1, 2, 2});
}

TEST_CASE("greedy decode inverts explicit-blank path encodings") {
    Rng rng(41);
    for (int rep = 0; rep < 50; ++rep) {
        const int vocab = 4;
        std::vector<int> y;
        const int len = rng.uniform_int(1, 6);
        for (int i = 0; i < len; ++i) y.push_back(rng.uniform_int(1, vocab - 1));
        // one-hot frames with blanks between repeats
        std::vector<int> frames;
        int prev = -1;
        for (int tok : y) {
            if (tok == prev) frames.push_back(0);
            frames.push_back(tok);
            prev = tok;
        }
        auto lp = numkit::tensor({frames.size(), static_cast<std::size_t>(vocab)}, -10.0);
        for (std::size_t t = 0; t < frames.size(); ++t)
            lp->at(t, static_cast<std::size_t>(frames[t])) = 0.0;
        CHECK(greedy_decode(*lp) == y);
    }
}

TEST_CASE("edit distance counts and tie-breaking") {
    auto c = edit_distance(std::vector<int>{1, 2, 3}, std::vector<int>{1, 9, 3});
    CHECK(c.sub == 1);
    CHECK(c.ins == 0);
    CHECK(c.del == 0);

    // classic character-level example
    const std::vector<std::string> kitten{"k", "i", "t", "t", "e", "n"};
    const std::vector<std::string> sitting{"s", "i", "t", "t", "i", "n", "g"};
    CHECK(edit_distance(kitten, sitting).total() == 3);

    auto same = edit_distance(std::vector<int>{5, 6}, std::vector<int>{5, 6});
    CHECK(same.total() == 0);
}

TEST_CASE("edit distance total is symmetric and satisfies the triangle inequality") {
    Rng rng(53);
    auto random_seq = [&] {
        std::vector<int> s;
        const int len = rng.uniform_int(0, 6);
        for (int i = 0; i < len; ++i) s.push_back(rng.uniform_int(1, 3));
        return s;
    };
    for (int rep = 0; rep < 200; ++rep) {
        const auto a = random_seq(), b = random_seq(), c = random_seq();
        const auto ab = edit_distance(a, b).total();
        CHECK(ab == edit_distance(b, a).total());
        CHECK(ab <= edit_distance(a, c).total() + edit_distance(c, b).total());
    }
}

TEST_CASE("scoring applies the granularity rules") {
    const TokenSeq ref{{1, 2, 3}, 0};
    const TokenSeq hyp{{1, 9, 3}, 0};

    // char-flagged language forces character granularity even if word requested
    ScoringSpec char_only{Granularity::character, true, -1};
    auto s = score(ref, hyp, Granularity::word, char_only);
    CHECK(s.ref_len == 3);
    CHECK(s.rate() == doctest::Approx(1.0 / 3.0));

    // word granularity splits on the separator token
    ScoringSpec words{Granularity::word, false, 7};
    const TokenSeq wref{{1, 2, 7, 3}, 0};   // "1 2 | 3" -> two words
    const TokenSeq whyp{{1, 2, 7, 4}, 0};
    auto w = score(wref, whyp, Granularity::word, words);
    CHECK(w.ref_len == 2);
    CHECK(w.sub == 1);
    CHECK(w.rate() == doctest::Approx(0.5));

    // rates above 1 are permitted
    const TokenSeq longhyp{{9, 9, 9, 9, 9, 9}, 0};
    auto over = score(ref, longhyp, Granularity::character, char_only);
    CHECK(over.rate() > 1.0);

    // identical sequences score zero
    auto zero = score(ref, ref, Granularity::character, char_only);
    CHECK(zero.rate() == 0.0);

    CHECK_THROWS_AS(score(TokenSeq{{}, 0}, hyp, Granularity::character, char_only),
                    std::runtime_error);
}
