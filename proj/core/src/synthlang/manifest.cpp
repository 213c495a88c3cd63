#include "clseq/synthlang/manifest.hpp"

#include <algorithm>
#include <bit>
#include <fstream>

#include <json.hpp>

#include "clseq/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "feature files assume a little-endian host");

namespace clseq::synthlang {

namespace {

nlohmann::json record_to_json(const ManifestRecord& r) {
    nlohmann::json j;
    j["id"] = r.id;
    j["lang"] = r.lang;
    if (r.inline_feats) {
        nlohmann::json rows = nlohmann::json::array();
        for (int t = 0; t < r.frames; ++t) {
            nlohmann::json row = nlohmann::json::array();
            for (int k = 0; k < r.d_in; ++k) row.push_back(r.feats[t * r.d_in + k]);
            rows.push_back(std::move(row));
        }
        j["feats"] = std::move(rows);
    } else {
        j["feats"] = r.feats_path;
    }
    j["tokens"] = r.tokens;
    j["frames"] = r.frames;
    return j;
}

ManifestRecord record_from_json(const nlohmann::json& j) {
    ManifestRecord r;
    r.id = j.at("id").get<std::string>();
    r.lang = j.at("lang").get<int>();
    r.tokens = j.at("tokens").get<std::vector<int>>();
    r.frames = j.at("frames").get<int>();
    const auto& feats = j.at("feats");
    if (feats.is_string()) {
        r.inline_feats = false;
        r.feats_path = feats.get<std::string>();
    } else {
        r.inline_feats = true;
        check(feats.is_array() && static_cast<int>(feats.size()) == r.frames,
              "manifest: inline feats row count does not match frames");
        for (const auto& row : feats) {
            if (r.d_in == 0) r.d_in = static_cast<int>(row.size());
            check(static_cast<int>(row.size()) == r.d_in, "manifest: ragged feature rows");
            for (const auto& x : row) r.feats.push_back(x.get<double>());
        }
    }
    return r;
}

}  // namespace

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    check(os.good(), "manifest: cannot open for writing: " + path.string());
    for (const auto& r : manifest) os << record_to_json(r).dump() << '\n';
    check(os.good(), "manifest: write failed: " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    check(is.good(), "manifest: cannot open: " + path.string());
    Manifest out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            fail(cat("manifest: ", path.string(), ":", line_no, ": ", e.what()));
        }
    }
    return out;
}

Manifest read_manifest(const std::filesystem::path& path, const TaskSpec& spec) {
    Manifest out = read_manifest(path);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& r = out[i];
        for (int tok : r.tokens)
            check(std::find(spec.vocab.begin(), spec.vocab.end(), tok) != spec.vocab.end(),
                  cat("manifest: record '", r.id, "': token ", tok,
                      " not in vocabulary of ", spec.name));
        check(r.frames >= 1 && r.frames <= spec.max_frames(),
              cat("manifest: record '", r.id, "': ", r.frames,
                  " frames outside duration bounds [1, ", spec.max_frames(), "]"));
    }
    return out;
}

void write_feature_file(const std::filesystem::path& path, const numkit::Tensor& features) {
    check(features.shape.size() == 2, "feature file: features must be 2-d");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    check(os.good(), "feature file: cannot open for writing: " + path.string());
    const std::uint32_t d_in = static_cast<std::uint32_t>(features.cols());
    const std::uint32_t frames = static_cast<std::uint32_t>(features.rows());
    os.write(reinterpret_cast<const char*>(&d_in), sizeof(d_in));
    os.write(reinterpret_cast<const char*>(&frames), sizeof(frames));
    os.write(reinterpret_cast<const char*>(features.v.data()),
             static_cast<std::streamsize>(features.v.size() * sizeof(double)));
    check(os.good(), "feature file: write failed: " + path.string());
}

numkit::TensorPtr read_feature_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    check(is.good(), "feature file: cannot open: " + path.string());
    std::uint32_t d_in = 0, frames = 0;
    is.read(reinterpret_cast<char*>(&d_in), sizeof(d_in));
    is.read(reinterpret_cast<char*>(&frames), sizeof(frames));
    check(is.good() && d_in > 0 && frames > 0, "feature file: bad header in " + path.string());
    auto t = numkit::tensor({frames, d_in});
    is.read(reinterpret_cast<char*>(t->v.data()),
            static_cast<std::streamsize>(t->v.size() * sizeof(double)));
    check(is.good(), "feature file: truncated values in " + path.string());
    return t;
}

Manifest manifest_from_dataset(const Dataset& data, int d_in) {
    Manifest out;
    out.reserve(data.size());
    for (const auto& u : data.utts) {
        ManifestRecord r;
        r.id = u.id;
        r.lang = u.lang;
        r.inline_feats = true;
        r.feats = u.features->v;
        r.d_in = d_in;
        r.tokens = u.tokens.ids;
        r.frames = static_cast<int>(u.features->rows());
        out.push_back(std::move(r));
    }
    return out;
}

Dataset dataset_from_manifest(const Manifest& manifest, const TaskSpec& spec,
                              const std::filesystem::path& base_dir) {
    Dataset out;
    for (const auto& r : manifest) {
        Utterance u;
        u.id = r.id;
        u.lang = r.lang;
        if (r.inline_feats) {
            u.features = numkit::tensor_of(
                {static_cast<std::size_t>(r.frames), static_cast<std::size_t>(r.d_in)},
                r.feats);
        } else {
            u.features = read_feature_file(base_dir / r.feats_path);
        }
        u.tokens = ctcwer::TokenSeq{r.tokens, spec.lang_id};
        out.utts.push_back(std::move(u));
    }
    return out;
}

}  // namespace clseq::synthlang
