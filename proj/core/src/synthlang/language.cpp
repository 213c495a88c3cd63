#include "clseq/synthlang/language.hpp"

#include <cmath>
#include <limits>

#include "clseq/error.hpp"

namespace clseq::synthlang {

using numkit::Rng;
using numkit::mix_seed;

int GeneratorConfig::shared_pool_size() const {
    return static_cast<int>(std::lround(overlap * tokens_per_language));
}

int GeneratorConfig::private_block_size() const {
    const int priv = tokens_per_language - shared_pool_size();
    return priv + (granularity == ctcwer::Granularity::word ? 1 : 0);
}

int GeneratorConfig::union_vocab_size(int total_languages) const {
    return 1 + shared_pool_size() + total_languages * private_block_size();
}

ctcwer::ScoringSpec TaskSpec::scoring() const {
    return {granularity, granularity == ctcwer::Granularity::character, separator_id};
}

std::vector<int> TaskSpec::content_tokens() const {
    std::vector<int> out;
    for (int id : vocab)
        if (id != separator_id) out.push_back(id);
    return out;
}

int TaskSpec::max_frames() const {
    // Content tokens plus at most one separator between each pair.
    const int max_tokens = utt_tokens_max + (separator_id >= 0 ? utt_tokens_max - 1 : 0);
    return max_tokens * frames_max;
}

namespace {

std::vector<double> draw_prototype(std::uint64_t pool_seed, int token_id, int d_in) {
    Rng rng(mix_seed(pool_seed, "prototype", static_cast<std::uint64_t>(token_id)));
    std::vector<double> p(d_in);
    for (auto& x : p) x = rng.normal();
    return p;
}

double min_pairwise_distance(const std::vector<std::vector<double>>& protos) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < protos.size(); ++i)
        for (std::size_t j = i + 1; j < protos.size(); ++j) {
            double sq = 0.0;
            for (std::size_t k = 0; k < protos[i].size(); ++k) {
                const double d = protos[i][k] - protos[j][k];
                sq += d * d;
            }
            best = std::min(best, std::sqrt(sq));
        }
    return best;
}

}  // namespace

TaskSpec gen_language(const GeneratorConfig& cfg, int lang_index, std::uint64_t seed) {
    check(cfg.overlap >= 0.0 && cfg.overlap <= 1.0, "gen_language: overlap must be in [0, 1]");
    check(cfg.tokens_per_language >= 2, "gen_language: need at least two tokens per language");
    check(cfg.d_in >= 1, "gen_language: d_in must be positive");
    check(cfg.train_size > 0 && cfg.val_size > 0 && cfg.test_size > 0,
          "gen_language: split sizes must be positive");
    check(cfg.frames_per_token_min >= 1 &&
              cfg.frames_per_token_max >= cfg.frames_per_token_min,
          "gen_language: bad frames-per-token range");
    check(cfg.utt_tokens_min >= 1 && cfg.utt_tokens_max >= cfg.utt_tokens_min,
          "gen_language: bad utterance length range");

    TaskSpec spec;
    spec.lang_id = lang_index;
    {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "L%02d", lang_index);
        spec.name = buf;
    }
    spec.granularity = cfg.granularity;
    spec.d_in = cfg.d_in;
    spec.frames_min = cfg.frames_per_token_min;
    spec.frames_max = cfg.frames_per_token_max;
    spec.utt_tokens_min = cfg.utt_tokens_min;
    spec.utt_tokens_max = cfg.utt_tokens_max;
    spec.noise_sigma = cfg.noise_sigma;
    spec.train_size = cfg.train_size;
    spec.val_size = cfg.val_size;
    spec.test_size = cfg.test_size;
    spec.seed = seed;

    const int pool = cfg.shared_pool_size();
    const int block = cfg.private_block_size();
    for (int i = 0; i < pool; ++i) spec.vocab.push_back(1 + i);
    const int private_base = 1 + pool + lang_index * block;
    for (int i = 0; i < block; ++i) spec.vocab.push_back(private_base + i);
    if (cfg.granularity == ctcwer::Granularity::word) spec.separator_id = spec.vocab.back();

    for (int id : spec.vocab)
        spec.prototypes.push_back(draw_prototype(cfg.pool_seed, id, cfg.d_in));
    const double min_dist = min_pairwise_distance(spec.prototypes);
    check(min_dist >= cfg.min_prototype_distance,
          cat("gen_language: d_in = ", cfg.d_in, " too small to separate ", spec.vocab.size(),
              " prototypes (min pairwise distance ", min_dist, " < ",
              cfg.min_prototype_distance, ")"));

    // Transition structure over content tokens; zero self-transition keeps
    // transcripts free of adjacent repeats, so frame classification alone can
    // recover them.
    const auto content = spec.content_tokens();
    const auto n = content.size();
    Rng rng(mix_seed(seed, "chain"));
    spec.start.resize(n);
    double z = 0.0;
    for (auto& x : spec.start) {
        x = rng.uniform(0.05, 1.0);
        z += x;
    }
    for (auto& x : spec.start) x /= z;
    spec.bigram.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            spec.bigram[i][j] = rng.uniform(0.05, 1.0);
            row_sum += spec.bigram[i][j];
        }
        for (std::size_t j = 0; j < n; ++j) spec.bigram[i][j] /= row_sum;
    }
    return spec;
}

namespace {

std::size_t sample_categorical(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;
}

}  // namespace

Utterance sample_utterance(const TaskSpec& task, Rng& rng) {
    const auto content = task.content_tokens();
    const int n_content = rng.uniform_int(task.utt_tokens_min, task.utt_tokens_max);

    std::vector<int> chain(static_cast<std::size_t>(n_content));
    std::size_t state = sample_categorical(task.start, rng);
    chain[0] = content[state];
    for (int i = 1; i < n_content; ++i) {
        state = sample_categorical(task.bigram[state], rng);
        chain[i] = content[state];
    }

    std::vector<int> transcript;
    if (task.separator_id >= 0) {
        // Words of 1-3 content tokens, single separators between them.
        std::size_t pos = 0;
        while (pos < chain.size()) {
            if (pos > 0) transcript.push_back(task.separator_id);
            const auto w = static_cast<std::size_t>(rng.uniform_int(1, 3));
            for (std::size_t i = 0; i < w && pos < chain.size(); ++i, ++pos)
                transcript.push_back(chain[pos]);
        }
    } else {
        transcript = chain;
    }

    std::vector<double> feats;
    std::size_t frames = 0;
    for (int tok : transcript) {
        std::size_t vi = 0;
        while (task.vocab[vi] != tok) ++vi;
        const auto& proto = task.prototypes[vi];
        const int k = rng.uniform_int(task.frames_min, task.frames_max);
        for (int c = 0; c < k; ++c) {
            for (double p : proto) feats.push_back(p + task.noise_sigma * rng.normal());
            ++frames;
        }
    }

    Utterance utt;
    utt.lang = task.lang_id;
    utt.features = numkit::tensor_of({frames, static_cast<std::size_t>(task.d_in)},
                                     std::move(feats));
    utt.tokens = ctcwer::TokenSeq{std::move(transcript), task.lang_id};
    return utt;
}

TaskData make_task_data(const TaskSpec& spec) {
    TaskData data;
    data.spec = spec;
    const struct {
        const char* name;
        int size;
        Dataset* out;
    } splits[] = {{"train", spec.train_size, &data.train},
                  {"val", spec.val_size, &data.val},
                  {"test", spec.test_size, &data.test}};
    for (const auto& s : splits) {
        Rng rng(mix_seed(spec.seed, s.name));
        for (int i = 0; i < s.size; ++i) {
            Utterance utt = sample_utterance(spec, rng);
            utt.id = cat(spec.name, "_", s.name, "_", i);
            s.out->utts.push_back(std::move(utt));
        }
    }
    return data;
}

}  // namespace clseq::synthlang
