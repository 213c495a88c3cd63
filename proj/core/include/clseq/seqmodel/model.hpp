#pragma once

#include <vector>

#include "clseq/numkit/checkpoint.hpp"
#include "clseq/numkit/ops.hpp"
#include "clseq/numkit/random.hpp"
#include "clseq/seqmodel/adapters.hpp"
#include "clseq/synthlang/language.hpp"

namespace clseq::seqmodel {

/// Shared: one head spans the union vocabulary and grows a language-token
/// column per registered language, which also conditions the encoder output.
/// Per-language: one head per learned task over that task's own tokens.
enum class TokenRegime { shared, per_language };

std::string regime_name(TokenRegime regime);
TokenRegime regime_from(const std::string& name);

struct EncoderConfig {
    std::size_t d_in = 8;
    std::size_t d_model = 64;
    std::size_t layers = 1;
    TokenRegime regime = TokenRegime::shared;
    int global_tokens = 0;  // dense global token ids 1..global_tokens
};

/// Gated recurrent frame encoder plus token heads and the three
/// architecture-based adaptation mechanisms.
class Model {
public:
    struct Sel {
        AdapterKind kind = AdapterKind::none;
        int lang = -1;
    };

    Model(EncoderConfig cfg, const std::vector<synthlang::TaskSpec>& base_tasks,
          numkit::Rng& rng);

    const EncoderConfig& config() const { return cfg_; }
    numkit::ParamStore& params() { return params_; }
    const numkit::ParamStore& params() const { return params_; }
    AdapterRegistry& adapters() { return adapters_; }
    const AdapterRegistry& adapters() const { return adapters_; }

    /// Shared regime: appends one randomly initialized language-token column
    /// to the head and marks the whole head trainable.
    void add_language_token(int lang_id, numkit::Rng& rng);
    /// Per-language regime: creates the task's head over its vocabulary.
    void add_task_head(const synthlang::TaskSpec& task, numkit::Rng& rng);
    /// Dispatches to whichever of the two the regime requires.
    void register_language(const synthlang::TaskSpec& task, numkit::Rng& rng);
    bool language_registered(int lang_id) const;
    /// Shared regime: current head width (token columns + language columns).
    std::size_t head_vocab_size() const;

    PnnColumn& create_pnn_column(int lang, const synthlang::TaskSpec& task, numkit::Rng& rng);
    PiggybackMask& create_piggyback(int lang, const synthlang::TaskSpec& task, double init,
                                    double threshold, numkit::Rng& rng);
    PromptEntry& create_prompt(int lang, const synthlang::TaskSpec& task, numkit::Rng& rng);

    /// Per-frame hidden representations. Prompt and column adapters transform
    /// the output; a mask adapter swaps masked base parameters during the pass.
    numkit::TensorPtr encode(numkit::Tape* tape, const numkit::TensorPtr& features,
                             const Sel& sel) const;
    /// Unnormalized per-frame token scores for the selected head.
    numkit::TensorPtr logits(numkit::Tape* tape, const numkit::TensorPtr& hidden,
                             const Sel& sel) const;
    numkit::TensorPtr forward(numkit::Tape* tape, const numkit::TensorPtr& features,
                              const Sel& sel) const;

    /// Maps global transcript ids to the selected head's local rows.
    std::vector<int> to_local_targets(const ctcwer::TokenSeq& tokens, const Sel& sel) const;
    /// Maps decoded local ids back to global token ids.
    std::vector<int> to_global(const std::vector<int>& local_ids, const Sel& sel) const;
    /// Columns valid for decoding under the selection.
    std::size_t decode_cols(const Sel& sel) const;

    /// Heads visible to distillation before `lang` was learned, oldest first.
    std::vector<const Head*> previous_heads(int lang) const;
    const Head& head_for(const Sel& sel) const;

    /// Base store plus adapter parameters plus the registry description.
    numkit::Checkpoint snapshot_all() const;
    /// Recreates missing heads/adapters from the registry description, then
    /// restores every value bit-exactly.
    void restore_all(const numkit::Checkpoint& ckpt);
    Model clone() const;

    /// Bare model with encoder and (shared regime) empty union head, ready
    /// for restore_all(); used to materialize checkpoints and clones.
    static Model skeleton(EncoderConfig cfg);

private:
    struct SkeletonTag {};
    Model(EncoderConfig cfg, SkeletonTag);

    EncoderConfig cfg_;
    numkit::ParamStore params_;
    Head shared_head_;                 // shared regime
    std::vector<int> shared_langs_;    // language column order
    std::map<int, Head> lang_heads_;   // per-language regime, keyed by lang id
    std::vector<int> head_order_;      // per-language heads in learned order
    Head base_head_;                   // per-language regime, task 0
    AdapterRegistry adapters_;

    void build_encoder(numkit::Rng& rng);
    void init_head_tensor(numkit::TensorPtr w, numkit::TensorPtr b, numkit::Rng& rng) const;
    Head make_task_head(const synthlang::TaskSpec& task, numkit::ParamStore& store,
                        numkit::Rng& rng) const;
    Head make_union_head(numkit::ParamStore& store, numkit::Rng& rng) const;
    numkit::TensorPtr run_encoder(numkit::Tape* tape, const numkit::TensorPtr& features,
                                  const PiggybackMask* mask) const;
    numkit::TensorPtr run_cell(numkit::Tape* tape, const numkit::TensorPtr& input,
                               std::size_t layer, const PiggybackMask* mask) const;
    int shared_lang_column(int lang_id) const;  // -1 when unregistered
};

}  // namespace clseq::seqmodel
