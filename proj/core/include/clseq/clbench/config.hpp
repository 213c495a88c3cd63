#pragma once

#include <filesystem>
#include <string>

#include "clseq/seqmodel/model.hpp"
#include "clseq/strategies/strategy.hpp"
#include "clseq/synthlang/language.hpp"

namespace clseq::clbench {

/// Everything a run depends on, resolved with defaults. The canonical dump
/// (and thus the hash) covers every field, so cached artifacts can never be
/// silently stale.
struct ExperimentConfig {
    // [model]
    seqmodel::TokenRegime regime = seqmodel::TokenRegime::shared;
    int d_in = 8;
    int d_model = 64;
    int layers = 1;

    // [data]
    int base_languages = 10;
    int new_languages = 10;
    synthlang::GeneratorConfig gen;

    // [train]
    int base_epochs = 20;
    int task_epochs = 2;
    int batch_size = 8;
    double learning_rate = 1e-4;
    double plateau_factor = 0.8;  // 20% reduction on no improvement
    double clip_norm = 5.0;
    double weight_decay = 0.0;

    // [strategy]
    strategies::StrategyConfig strategy;

    // [run]
    std::uint64_t seed = 17;

    static ExperimentConfig from_file(const std::filesystem::path& path);
    static ExperimentConfig from_string(const std::string& text);

    /// Resolved key/value dump in a fixed order.
    std::string canonical() const;
    /// Hash of the full canonical dump.
    std::string config_hash() const;
    /// Hash excluding the strategy section; reference runs are shared across
    /// strategies under the same value.
    std::string refs_hash() const;

    int total_languages() const { return base_languages + new_languages; }
    seqmodel::EncoderConfig encoder_config() const;
};

}  // namespace clseq::clbench
