#pragma once

#include <map>
#include <string>
#include <vector>

#include "clseq/numkit/param_store.hpp"

namespace clseq::seqmodel {

enum class AdapterKind { none, pnn, pb, l2p };

std::string adapter_kind_name(AdapterKind kind);
AdapterKind adapter_kind_from(const std::string& name);

/// Output head: projection from d_model to a local token space.
/// Column 0 is always blank; columns beyond usable_cols (shared regime) are
/// language-token entries and never decoded.
struct Head {
    numkit::TensorPtr w;  // d_model x cols
    numkit::TensorPtr b;  // 1 x cols
    std::vector<int> local_to_global;  // per usable column; [0] = blank
    std::size_t usable_cols = 0;

    int to_local(int global_id) const;  // -1 when the head cannot emit it
};

/// Task-specific recurrent column; reads the frozen base encoder's output.
struct PnnColumn {
    int lang = -1;
    numkit::ParamStore params;  // cell parameters + task head
    Head head;
};

/// Binary masks over selected frozen base parameters, stored as real-valued
/// weights that threshold deterministically to {0, 1}.
struct PiggybackMask {
    int lang = -1;
    double threshold = 0.005;
    std::vector<std::string> masked;  // base parameter names covered
    numkit::ParamStore real_weights;  // entry "mask.<base name>" per covered name
    bool has_task_head = false;       // per-language regime trains a fresh head
    numkit::ParamStore head_params;
    Head head;
};

/// Per-task prompt matrix; the encoder output is post-multiplied by it.
struct PromptEntry {
    int lang = -1;
    numkit::ParamStore params;  // "prompt" (+ task head in per-language regime)
    bool has_task_head = false;
    Head head;
};

class AdapterRegistry {
public:
    bool has(AdapterKind kind, int lang) const;

    PnnColumn& pnn(int lang);
    const PnnColumn& pnn(int lang) const;
    PiggybackMask& pb(int lang);
    const PiggybackMask& pb(int lang) const;
    PromptEntry& l2p(int lang);
    const PromptEntry& l2p(int lang) const;

    PnnColumn& emplace_pnn(int lang);
    PiggybackMask& emplace_pb(int lang);
    PromptEntry& emplace_l2p(int lang);

    const std::map<int, PnnColumn>& all_pnn() const { return pnn_; }
    const std::map<int, PiggybackMask>& all_pb() const { return pb_; }
    const std::map<int, PromptEntry>& all_l2p() const { return l2p_; }
    std::map<int, PnnColumn>& all_pnn() { return pnn_; }
    std::map<int, PiggybackMask>& all_pb() { return pb_; }
    std::map<int, PromptEntry>& all_l2p() { return l2p_; }

private:
    std::map<int, PnnColumn> pnn_;
    std::map<int, PiggybackMask> pb_;
    std::map<int, PromptEntry> l2p_;
};

}  // namespace clseq::seqmodel
