#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "clseq/numkit/param_store.hpp"

namespace clseq::numkit {

/// In-memory snapshot of a parameter store, round-trippable bit-exactly
/// through the on-disk archive: a magic header, a JSON index describing each
/// entry, and the raw little-endian values.
struct Checkpoint {
    struct Entry {
        std::string name;
        Shape shape;
        std::vector<double> values;
        bool frozen = false;
    };

    std::vector<Entry> entries;
    std::string meta_json = "{}";  // caller-owned side data (adapter registry, ...)

    const Entry* find(const std::string& name) const;
};

Checkpoint snapshot(const ParamStore& params);

/// Writes every checkpoint entry into matching params entries. Shapes must
/// agree and every checkpoint entry must exist in the store; frozen flags are
/// restored as recorded.
void restore(const Checkpoint& ckpt, ParamStore& params);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace clseq::numkit
