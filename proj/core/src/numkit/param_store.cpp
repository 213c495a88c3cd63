#include "clseq/numkit/param_store.hpp"

#include "clseq/error.hpp"

namespace clseq::numkit {

TensorPtr ParamStore::add(const std::string& name, TensorPtr t, bool frozen) {
    check(t != nullptr, "param_store: null tensor for '" + name + "'");
    check(index_.count(name) == 0, "param_store: duplicate name '" + name + "'");
    t->requires_grad = !frozen;
    index_[name] = entries_.size();
    entries_.push_back({name, t, frozen});
    return t;
}

const ParamEntry& ParamStore::entry(const std::string& name) const {
    auto it = index_.find(name);
    check(it != index_.end(), "param_store: unknown name '" + name + "'");
    return entries_[it->second];
}

ParamEntry& ParamStore::entry(const std::string& name) {
    auto it = index_.find(name);
    check(it != index_.end(), "param_store: unknown name '" + name + "'");
    return entries_[it->second];
}

TensorPtr ParamStore::at(const std::string& name) const { return entry(name).tensor; }

void ParamStore::set_frozen(const std::string& name, bool frozen) {
    auto& e = entry(name);
    e.frozen = frozen;
    e.tensor->requires_grad = !frozen;
}

bool ParamStore::frozen(const std::string& name) const { return entry(name).frozen; }

void ParamStore::zero_grads() const {
    for (const auto& e : entries_) e.tensor->zero_grad();
}

}  // namespace clseq::numkit
