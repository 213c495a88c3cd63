#include "clseq/seqmodel/adapters.hpp"

#include "clseq/error.hpp"

namespace clseq::seqmodel {

std::string adapter_kind_name(AdapterKind kind) {
    switch (kind) {
        case AdapterKind::none: return "none";
        case AdapterKind::pnn: return "pnn";
        case AdapterKind::pb: return "pb";
        case AdapterKind::l2p: return "l2p";
    }
    fail("adapter_kind_name: bad kind");
}

AdapterKind adapter_kind_from(const std::string& name) {
    if (name == "none") return AdapterKind::none;
    if (name == "pnn") return AdapterKind::pnn;
    if (name == "pb") return AdapterKind::pb;
    if (name == "l2p") return AdapterKind::l2p;
    fail("adapter_kind_from: unknown kind '" + name + "'");
}

int Head::to_local(int global_id) const {
    for (std::size_t i = 0; i < local_to_global.size(); ++i)
        if (local_to_global[i] == global_id) return static_cast<int>(i);
    return -1;
}

bool AdapterRegistry::has(AdapterKind kind, int lang) const {
    switch (kind) {
        case AdapterKind::pnn: return pnn_.count(lang) != 0;
        case AdapterKind::pb: return pb_.count(lang) != 0;
        case AdapterKind::l2p: return l2p_.count(lang) != 0;
        case AdapterKind::none: return false;
    }
    return false;
}

namespace {

template <class Map>
auto& lookup(Map& m, int lang, const char* kind) {
    auto it = m.find(lang);
    check(it != m.end(), cat("adapters: no ", kind, " state for task ", lang));
    return it->second;
}

}  // namespace

PnnColumn& AdapterRegistry::pnn(int lang) { return lookup(pnn_, lang, "pnn"); }
const PnnColumn& AdapterRegistry::pnn(int lang) const { return lookup(pnn_, lang, "pnn"); }
PiggybackMask& AdapterRegistry::pb(int lang) { return lookup(pb_, lang, "pb"); }
const PiggybackMask& AdapterRegistry::pb(int lang) const { return lookup(pb_, lang, "pb"); }
PromptEntry& AdapterRegistry::l2p(int lang) { return lookup(l2p_, lang, "l2p"); }
const PromptEntry& AdapterRegistry::l2p(int lang) const { return lookup(l2p_, lang, "l2p"); }

PnnColumn& AdapterRegistry::emplace_pnn(int lang) {
    check(pnn_.count(lang) == 0, cat("adapters: pnn column already exists for task ", lang));
    auto& a = pnn_[lang];
    a.lang = lang;
    return a;
}

PiggybackMask& AdapterRegistry::emplace_pb(int lang) {
    check(pb_.count(lang) == 0, cat("adapters: pb mask already exists for task ", lang));
    auto& a = pb_[lang];
    a.lang = lang;
    return a;
}

PromptEntry& AdapterRegistry::emplace_l2p(int lang) {
    check(l2p_.count(lang) == 0, cat("adapters: prompt already exists for task ", lang));
    auto& a = l2p_[lang];
    a.lang = lang;
    return a;
}

}  // namespace clseq::seqmodel
