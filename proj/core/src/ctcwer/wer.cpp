#include "clseq/ctcwer/wer.hpp"

#include "clseq/error.hpp"

namespace clseq::ctcwer {

namespace {

template <class Unit>
EditCounts edit_distance_impl(const std::vector<Unit>& ref, const std::vector<Unit>& hyp) {
    const std::size_t n = ref.size(), m = hyp.size();
    struct Cell {
        std::size_t cost, sub, ins, del;
    };
    std::vector<Cell> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = {j, 0, j, 0};
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = {i, 0, 0, i};
        for (std::size_t j = 1; j <= m; ++j) {
            const bool match = ref[i - 1] == hyp[j - 1];
            Cell diag = prev[j - 1];
            diag.cost += match ? 0 : 1;
            diag.sub += match ? 0 : 1;
            Cell del = prev[j];
            del.cost += 1;
            del.del += 1;
            Cell ins = cur[j - 1];
            ins.cost += 1;
            ins.ins += 1;
            // Tie order: substitution/match, then deletion, then insertion.
            Cell best = diag;
            if (del.cost < best.cost) best = del;
            if (ins.cost < best.cost) best = ins;
            cur[j] = best;
        }
        std::swap(prev, cur);
    }
    return {prev[m].sub, prev[m].ins, prev[m].del};
}

std::string join_tokens(const std::vector<int>& ids, std::size_t begin, std::size_t end) {
    std::string s;
    for (std::size_t i = begin; i < end; ++i) {
        if (i > begin) s += ',';
        s += std::to_string(ids[i]);
    }
    return s;
}

std::vector<std::string> split_words(const std::vector<int>& ids, int separator) {
    std::vector<std::string> words;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= ids.size(); ++i) {
        if (i == ids.size() || ids[i] == separator) {
            if (i > start) words.push_back(join_tokens(ids, start, i));
            start = i + 1;
        }
    }
    return words;
}

}  // namespace

EditCounts edit_distance(const std::vector<int>& ref, const std::vector<int>& hyp) {
    return edit_distance_impl(ref, hyp);
}

EditCounts edit_distance(const std::vector<std::string>& ref,
                         const std::vector<std::string>& hyp) {
    return edit_distance_impl(ref, hyp);
}

double WerScore::rate() const {
    check(ref_len > 0, "wer: empty reference");
    return static_cast<double>(sub + ins + del) / static_cast<double>(ref_len);
}

WerScore& WerScore::operator+=(const WerScore& other) {
    sub += other.sub;
    ins += other.ins;
    del += other.del;
    ref_len += other.ref_len;
    return *this;
}

WerScore score(const TokenSeq& ref, const TokenSeq& hyp, Granularity requested,
               const ScoringSpec& spec) {
    check(!ref.ids.empty(), "score: empty reference transcript");
    const Granularity effective =
        spec.char_only ? Granularity::character : requested;
    if (effective == Granularity::word) {
        check(spec.separator_id >= 0, "score: word granularity needs a separator token");
        const auto ref_words = split_words(ref.ids, spec.separator_id);
        const auto hyp_words = split_words(hyp.ids, spec.separator_id);
        check(!ref_words.empty(), "score: reference has no words");
        const EditCounts c = edit_distance(ref_words, hyp_words);
        return {c.sub, c.ins, c.del, ref_words.size()};
    }
    const EditCounts c = edit_distance(ref.ids, hyp.ids);
    return {c.sub, c.ins, c.del, ref.ids.size()};
}

}  // namespace clseq::ctcwer
