#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "clseq/numkit/tensor.hpp"

namespace clseq::numkit {

struct ParamEntry {
    std::string name;
    TensorPtr tensor;
    bool frozen = false;
};

/// Named collection of trainable tensors with stable insertion order.
/// Frozen entries stay visible to checkpointing but never receive
/// optimizer updates and are excluded from gradient clipping.
class ParamStore {
public:
    TensorPtr add(const std::string& name, TensorPtr t, bool frozen = false);
    TensorPtr at(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    void set_frozen(const std::string& name, bool frozen);
    bool frozen(const std::string& name) const;

    void zero_grads() const;

    std::size_t size() const { return entries_.size(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }
    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }

private:
    std::vector<ParamEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;

    const ParamEntry& entry(const std::string& name) const;
    ParamEntry& entry(const std::string& name);
};

}  // namespace clseq::numkit
