#include "clseq/numkit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "clseq/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint archives assume a little-endian host");

namespace clseq::numkit {

namespace {

constexpr char kMagic[8] = {'C', 'L', 'S', 'Q', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t x) {
    os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

void write_u64(std::ostream& os, std::uint64_t x) {
    os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t x = 0;
    is.read(reinterpret_cast<char*>(&x), sizeof(x));
    return x;
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t x = 0;
    is.read(reinterpret_cast<char*>(&x), sizeof(x));
    return x;
}

}  // namespace

const Checkpoint::Entry* Checkpoint::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

Checkpoint snapshot(const ParamStore& params) {
    Checkpoint ckpt;
    ckpt.entries.reserve(params.size());
    for (const auto& e : params)
        ckpt.entries.push_back({e.name, e.tensor->shape, e.tensor->v, e.frozen});
    return ckpt;
}

void restore(const Checkpoint& ckpt, ParamStore& params) {
    for (const auto& e : ckpt.entries) {
        check(params.contains(e.name), "restore: store has no parameter '" + e.name + "'");
        auto t = params.at(e.name);
        check(t->shape == e.shape,
              cat("restore: shape mismatch for '", e.name, "': checkpoint ", shape_str(e.shape),
                  " vs store ", shape_str(t->shape)));
        t->v = e.values;
        params.set_frozen(e.name, e.frozen);
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    nlohmann::json index;
    index["version"] = kVersion;
    index["meta"] = nlohmann::json::parse(ckpt.meta_json);
    auto& list = index["entries"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& e : ckpt.entries) {
        list.push_back({{"name", e.name},
                        {"shape", e.shape},
                        {"offset", offset},
                        {"count", e.values.size()},
                        {"frozen", e.frozen}});
        offset += e.values.size();
    }
    const std::string index_str = index.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    check(os.good(), "checkpoint: cannot open for writing: " + path.string());
    os.write(kMagic, sizeof(kMagic));
    write_u32(os, kVersion);
    write_u64(os, index_str.size());
    os.write(index_str.data(), static_cast<std::streamsize>(index_str.size()));
    for (const auto& e : ckpt.entries)
        os.write(reinterpret_cast<const char*>(e.values.data()),
                 static_cast<std::streamsize>(e.values.size() * sizeof(double)));
    check(os.good(), "checkpoint: write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    check(is.good(), "checkpoint: cannot open: " + path.string());

    char magic[8];
    is.read(magic, sizeof(magic));
    check(is.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
          "checkpoint: bad magic header in " + path.string());
    const std::uint32_t version = read_u32(is);
    check(version == kVersion,
          cat("checkpoint: unsupported version ", version, " in ", path.string()));
    const std::uint64_t index_len = read_u64(is);
    std::string index_str(index_len, '\0');
    is.read(index_str.data(), static_cast<std::streamsize>(index_len));
    check(is.good(), "checkpoint: truncated index in " + path.string());

    nlohmann::json index;
    try {
        index = nlohmann::json::parse(index_str);
    } catch (const nlohmann::json::exception& e) {
        fail(cat("checkpoint: corrupt index in ", path.string(), ": ", e.what()));
    }

    Checkpoint ckpt;
    ckpt.meta_json = index.value("meta", nlohmann::json::object()).dump();
    for (const auto& item : index.at("entries")) {
        Checkpoint::Entry e;
        e.name = item.at("name").get<std::string>();
        e.shape = item.at("shape").get<Shape>();
        e.frozen = item.at("frozen").get<bool>();
        const auto count = item.at("count").get<std::uint64_t>();
        check(count == shape_size(e.shape),
              cat("checkpoint: entry '", e.name, "' count ", count, " does not match shape ",
                  shape_str(e.shape)));
        e.values.resize(count);
        is.read(reinterpret_cast<char*>(e.values.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        check(is.good(), "checkpoint: truncated values for entry '" + e.name + "'");
        ckpt.entries.push_back(std::move(e));
    }
    return ckpt;
}

}  // namespace clseq::numkit
