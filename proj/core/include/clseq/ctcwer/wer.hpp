#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace clseq::ctcwer {

/// Transcript as token ids; blank never appears here.
struct TokenSeq {
    std::vector<int> ids;
    int lang = -1;
};

struct EditCounts {
    std::size_t sub = 0;
    std::size_t ins = 0;
    std::size_t del = 0;
    std::size_t total() const { return sub + ins + del; }
};

/// Minimal-edit alignment with unit costs. Ties are broken deterministically:
/// substitution is preferred over an insert+delete pair.
EditCounts edit_distance(const std::vector<int>& ref, const std::vector<int>& hyp);
EditCounts edit_distance(const std::vector<std::string>& ref,
                         const std::vector<std::string>& hyp);

struct WerScore {
    std::size_t sub = 0;
    std::size_t ins = 0;
    std::size_t del = 0;
    std::size_t ref_len = 0;

    /// Unclamped: may exceed 1 when the hypothesis is much longer than the
    /// reference.
    double rate() const;

    WerScore& operator+=(const WerScore& other);
};

enum class Granularity { word, character };

/// Per-language scoring rules. Languages without word boundaries carry
/// char_only = true and are always scored at character granularity,
/// whatever the caller requested.
struct ScoringSpec {
    Granularity granularity = Granularity::character;
    bool char_only = true;
    int separator_id = -1;  // token that delimits words; required for word scoring
};

WerScore score(const TokenSeq& ref, const TokenSeq& hyp, Granularity requested,
               const ScoringSpec& spec);

}  // namespace clseq::ctcwer
