#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clseq/ctcwer/wer.hpp"
#include "clseq/numkit/random.hpp"
#include "clseq/numkit/tensor.hpp"

namespace clseq::synthlang {

/// Knobs for one family of synthetic languages. Token-space overlap is the
/// central one: it controls how much of each language's vocabulary comes
/// from a pool shared by all languages versus fresh private tokens.
struct GeneratorConfig {
    int d_in = 8;
    int tokens_per_language = 8;
    double overlap = 0.0;  // in [0, 1]
    int frames_per_token_min = 2;
    int frames_per_token_max = 3;
    int utt_tokens_min = 2;
    int utt_tokens_max = 6;
    double noise_sigma = 0.3;
    int train_size = 120;
    int val_size = 24;
    int test_size = 24;
    ctcwer::Granularity granularity = ctcwer::Granularity::character;
    double min_prototype_distance = 0.5;
    std::uint64_t pool_seed = 1;  // fixes shared-pool prototypes across languages

    int shared_pool_size() const;
    int private_block_size() const;  // private tokens (+ separator for word languages)
    /// Dense global token ids: 0 = blank, 1..pool = shared, then one private
    /// block per language index.
    int union_vocab_size(int total_languages) const;
};

/// One synthetic "language": its vocabulary, emission model, and split sizes.
/// Fully determined by (config, lang_index, seed).
struct TaskSpec {
    int lang_id = 0;
    std::string name;
    std::vector<int> vocab;  // global token ids, blank excluded
    int separator_id = -1;
    ctcwer::Granularity granularity = ctcwer::Granularity::character;
    int d_in = 0;
    std::vector<std::vector<double>> prototypes;  // aligned with vocab
    std::vector<double> start;                    // over content tokens, sums to 1
    std::vector<std::vector<double>> bigram;      // rows over content tokens, sum to 1
    int frames_min = 2;
    int frames_max = 3;
    int utt_tokens_min = 2;
    int utt_tokens_max = 6;
    double noise_sigma = 0.0;
    int train_size = 0;
    int val_size = 0;
    int test_size = 0;
    std::uint64_t seed = 0;

    bool operator==(const TaskSpec&) const = default;

    ctcwer::ScoringSpec scoring() const;
    /// Content tokens: vocabulary minus the separator.
    std::vector<int> content_tokens() const;
    int max_frames() const;
};

TaskSpec gen_language(const GeneratorConfig& cfg, int lang_index, std::uint64_t seed);

struct Utterance {
    std::string id;
    int lang = -1;
    numkit::TensorPtr features;  // frames x d_in
    ctcwer::TokenSeq tokens;
};

Utterance sample_utterance(const TaskSpec& task, numkit::Rng& rng);

struct Dataset {
    std::vector<Utterance> utts;
    std::size_t size() const { return utts.size(); }
};

struct TaskData {
    TaskSpec spec;
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Deterministic split construction; train/val/test utterance ids never
/// overlap and each split draws from its own stream.
TaskData make_task_data(const TaskSpec& spec);

}  // namespace clseq::synthlang
