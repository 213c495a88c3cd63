#include "clseq/clbench/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "clseq/error.hpp"

namespace clseq::clbench {

namespace {

using SectionMap = std::map<std::string, std::map<std::string, std::string>>;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

SectionMap parse_ini(const std::string& text) {
    SectionMap out;
    std::istringstream is(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            check(line.back() == ']', cat("config: line ", line_no, ": unterminated section"));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        check(eq != std::string::npos, cat("config: line ", line_no, ": expected key = value"));
        check(!section.empty(), cat("config: line ", line_no, ": key outside any section"));
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        check(!key.empty(), cat("config: line ", line_no, ": empty key"));
        check(out[section].emplace(key, value).second,
              cat("config: line ", line_no, ": duplicate key '", key, "'"));
    }
    return out;
}

class Applier {
public:
    explicit Applier(SectionMap sections) : sections_(std::move(sections)) {}

    template <class T>
    void get(const std::string& section, const std::string& key, T& out) {
        auto sec = sections_.find(section);
        if (sec == sections_.end()) return;
        auto it = sec->second.find(key);
        if (it == sec->second.end()) return;
        parse(section + "." + key, it->second, out);
        consumed_.insert(section + "." + key);
    }

    void finish() const {
        for (const auto& [section, keys] : sections_)
            for (const auto& [key, value] : keys)
                check(consumed_.count(section + "." + key) != 0,
                      "config: unknown key '" + section + "." + key + "'");
    }

private:
    SectionMap sections_;
    std::set<std::string> consumed_;

    static void parse(const std::string& where, const std::string& v, int& out) {
        try {
            out = std::stoi(v);
        } catch (...) {
            fail("config: " + where + ": expected integer, got '" + v + "'");
        }
    }
    static void parse(const std::string& where, const std::string& v, std::uint64_t& out) {
        try {
            out = std::stoull(v);
        } catch (...) {
            fail("config: " + where + ": expected unsigned integer, got '" + v + "'");
        }
    }
    static void parse(const std::string& where, const std::string& v, double& out) {
        try {
            out = std::stod(v);
        } catch (...) {
            fail("config: " + where + ": expected number, got '" + v + "'");
        }
    }
    static void parse(const std::string&, const std::string& v, std::string& out) { out = v; }
};

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    check(is.good(), "config: cannot open: " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return from_string(ss.str());
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
    ExperimentConfig cfg;
    Applier ini(parse_ini(text));

    std::string regime = "shared";
    ini.get("model", "regime", regime);
    cfg.regime = seqmodel::regime_from(regime);
    ini.get("model", "d_in", cfg.d_in);
    ini.get("model", "d_model", cfg.d_model);
    ini.get("model", "layers", cfg.layers);

    ini.get("data", "base_languages", cfg.base_languages);
    ini.get("data", "new_languages", cfg.new_languages);
    ini.get("data", "tokens_per_language", cfg.gen.tokens_per_language);
    ini.get("data", "overlap", cfg.gen.overlap);
    ini.get("data", "frames_per_token_min", cfg.gen.frames_per_token_min);
    ini.get("data", "frames_per_token_max", cfg.gen.frames_per_token_max);
    ini.get("data", "utt_tokens_min", cfg.gen.utt_tokens_min);
    ini.get("data", "utt_tokens_max", cfg.gen.utt_tokens_max);
    ini.get("data", "noise_sigma", cfg.gen.noise_sigma);
    ini.get("data", "train_size", cfg.gen.train_size);
    ini.get("data", "val_size", cfg.gen.val_size);
    ini.get("data", "test_size", cfg.gen.test_size);
    ini.get("data", "min_prototype_distance", cfg.gen.min_prototype_distance);
    std::string granularity = "char";
    ini.get("data", "granularity", granularity);
    check(granularity == "char" || granularity == "word",
          "config: data.granularity must be 'char' or 'word'");
    cfg.gen.granularity = granularity == "word" ? ctcwer::Granularity::word
                                                : ctcwer::Granularity::character;

    ini.get("train", "base_epochs", cfg.base_epochs);
    ini.get("train", "task_epochs", cfg.task_epochs);
    ini.get("train", "batch_size", cfg.batch_size);
    ini.get("train", "learning_rate", cfg.learning_rate);
    ini.get("train", "plateau_factor", cfg.plateau_factor);
    ini.get("train", "clip_norm", cfg.clip_norm);
    ini.get("train", "weight_decay", cfg.weight_decay);

    std::string kind = "ft";
    ini.get("strategy", "kind", kind);
    cfg.strategy.kind = strategies::strategy_from(kind);
    ini.get("strategy", "replay_ratio", cfg.strategy.replay_ratio);
    ini.get("strategy", "der_alpha", cfg.strategy.der_alpha);
    ini.get("strategy", "ewc_lambda", cfg.strategy.ewc_lambda);
    ini.get("strategy", "ewc_alpha", cfg.strategy.ewc_alpha);
    ini.get("strategy", "lwf_temperature", cfg.strategy.lwf_temperature);
    ini.get("strategy", "lwf_lambda", cfg.strategy.lwf_lambda);
    ini.get("strategy", "mas_lambda", cfg.strategy.mas_lambda);
    ini.get("strategy", "mas_alpha", cfg.strategy.mas_alpha);
    ini.get("strategy", "pb_init", cfg.strategy.pb_init);
    ini.get("strategy", "pb_threshold", cfg.strategy.pb_threshold);

    ini.get("run", "seed", cfg.seed);
    ini.finish();

    check(cfg.base_languages >= 1 && cfg.new_languages >= 1,
          "config: need at least one base and one new language");
    check(cfg.batch_size >= 1, "config: batch_size must be positive");
    check(cfg.base_epochs >= 1 && cfg.task_epochs >= 1, "config: epochs must be positive");
    check(cfg.plateau_factor > 0.0 && cfg.plateau_factor < 1.0,
          "config: plateau_factor must be in (0, 1)");
    cfg.gen.d_in = cfg.d_in;
    cfg.gen.pool_seed = numkit::mix_seed(cfg.seed, "pool");
    return cfg;
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "model.regime=" << seqmodel::regime_name(regime) << '\n'
       << "model.d_in=" << d_in << '\n'
       << "model.d_model=" << d_model << '\n'
       << "model.layers=" << layers << '\n'
       << "data.base_languages=" << base_languages << '\n'
       << "data.new_languages=" << new_languages << '\n'
       << "data.tokens_per_language=" << gen.tokens_per_language << '\n'
       << "data.overlap=" << gen.overlap << '\n'
       << "data.frames_per_token_min=" << gen.frames_per_token_min << '\n'
       << "data.frames_per_token_max=" << gen.frames_per_token_max << '\n'
       << "data.utt_tokens_min=" << gen.utt_tokens_min << '\n'
       << "data.utt_tokens_max=" << gen.utt_tokens_max << '\n'
       << "data.noise_sigma=" << gen.noise_sigma << '\n'
       << "data.train_size=" << gen.train_size << '\n'
       << "data.val_size=" << gen.val_size << '\n'
       << "data.test_size=" << gen.test_size << '\n'
       << "data.min_prototype_distance=" << gen.min_prototype_distance << '\n'
       << "data.granularity="
       << (gen.granularity == ctcwer::Granularity::word ? "word" : "char") << '\n'
       << "train.base_epochs=" << base_epochs << '\n'
       << "train.task_epochs=" << task_epochs << '\n'
       << "train.batch_size=" << batch_size << '\n'
       << "train.learning_rate=" << learning_rate << '\n'
       << "train.plateau_factor=" << plateau_factor << '\n'
       << "train.clip_norm=" << clip_norm << '\n'
       << "train.weight_decay=" << weight_decay << '\n'
       << "strategy.kind=" << strategies::strategy_name(strategy.kind) << '\n'
       << "strategy.replay_ratio=" << strategy.replay_ratio << '\n'
       << "strategy.der_alpha=" << strategy.der_alpha << '\n'
       << "strategy.ewc_lambda=" << strategy.ewc_lambda << '\n'
       << "strategy.ewc_alpha=" << strategy.ewc_alpha << '\n'
       << "strategy.lwf_temperature=" << strategy.lwf_temperature << '\n'
       << "strategy.lwf_lambda=" << strategy.lwf_lambda << '\n'
       << "strategy.mas_lambda=" << strategy.mas_lambda << '\n'
       << "strategy.mas_alpha=" << strategy.mas_alpha << '\n'
       << "strategy.pb_init=" << strategy.pb_init << '\n'
       << "strategy.pb_threshold=" << strategy.pb_threshold << '\n'
       << "run.seed=" << seed << '\n';
    return os.str();
}

namespace {

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

std::string ExperimentConfig::config_hash() const { return fnv1a_hex(canonical()); }

std::string ExperimentConfig::refs_hash() const {
    std::istringstream is(canonical());
    std::ostringstream os;
    std::string line;
    while (std::getline(is, line))
        if (line.rfind("strategy.", 0) != 0) os << line << '\n';
    return fnv1a_hex(os.str());
}

seqmodel::EncoderConfig ExperimentConfig::encoder_config() const {
    seqmodel::EncoderConfig enc;
    enc.d_in = static_cast<std::size_t>(d_in);
    enc.d_model = static_cast<std::size_t>(d_model);
    enc.layers = static_cast<std::size_t>(layers);
    enc.regime = regime;
    enc.global_tokens = gen.union_vocab_size(total_languages()) - 1;
    return enc;
}

}  // namespace clseq::clbench
