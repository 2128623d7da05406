#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace amvl {

using ItemId = uint64_t;

enum class Tier : uint8_t { Hot = 0, Warm = 1, Cold = 2 };

inline const char* tier_name(Tier t) {
    switch (t) {
        case Tier::Hot: return "hot";
        case Tier::Warm: return "warm";
        case Tier::Cold: return "cold";
    }
    return "?";
}

enum class PolicyKind : uint8_t { AMVL = 0, TTL = 1, LRU = 2 };

inline const char* policy_name(PolicyKind p) {
    switch (p) {
        case PolicyKind::AMVL: return "amvl";
        case PolicyKind::TTL: return "ttl";
        case PolicyKind::LRU: return "lru";
    }
    return "?";
}

// One stored memory record. label_value is ground truth assigned by the
// workload generator; it is never visible to eligibility policies.
struct MemoryItem {
    ItemId id = 0;
    std::string namespace_tag;
    std::string content;
    std::vector<float> embedding;  // unit norm, dimension D
    double value = 0.0;            // V(m), in [0, V_max]
    double t_last = 0.0;           // virtual seconds, last value update
    double t_created = 0.0;
    double t_last_access = 0.0;  // valid iff accessed
    bool accessed = false;
    Tier tier = Tier::Hot;
    double label_value = 0.0;  // ground-truth utility in [0,1]
    bool evicted = false;
};

// Usage signals observed for one item in one request.
struct UsageEvent {
    ItemId item_id = 0;
    bool access = false;
    bool contrib = false;  // implies access
    double t_now = 0.0;
};

enum class TransitionCause : uint8_t { Promotion = 0, Demotion = 1, Eviction = 2 };

struct TierTransition {
    ItemId item_id = 0;
    Tier from_tier = Tier::Hot;
    Tier to_tier = Tier::Hot;
    double value_at_transition = 0.0;
    double t = 0.0;
    TransitionCause cause = TransitionCause::Promotion;
};

// Per-request retrieval-eligible set R with provenance.
struct CandidateSet {
    std::vector<ItemId> ids;  // hot part first, then warm sample
    size_t hot_count = 0;     // |hot_part| (AMV-L: entire T_H at build)
    size_t warm_count = 0;    // |warm_part| <= k
    PolicyKind policy = PolicyKind::AMVL;
    double built_at = 0.0;
};

struct ScanHit {
    ItemId id = 0;
    double similarity = 0.0;
};

struct ScanResult {
    std::vector<ScanHit> hits;    // similarity desc, id asc; length <= k_out
    size_t vectors_scanned = 0;   // |allowlist ∩ indexed ids|
};

struct SweepReport {
    size_t visited = 0;
    size_t decayed = 0;
    size_t promoted = 0;
    size_t demoted = 0;
    size_t evicted = 0;
    size_t queue_applied = 0;  // queued transitions reconciled this sweep
};

enum class RequestKind : uint8_t { Write = 0, Recall = 1, Ask = 2 };

inline const char* request_kind_name(RequestKind k) {
    switch (k) {
        case RequestKind::Write: return "write";
        case RequestKind::Recall: return "recall";
        case RequestKind::Ask: return "ask";
    }
    return "?";
}

struct AskRequest {
    std::string query_text;
    std::string namespace_tag;
    double t_virtual = 0.0;
    uint64_t request_index = 0;
    RequestKind kind = RequestKind::Ask;
};

struct InjectedItem {
    ItemId id = 0;
    double similarity = 0.0;
    double label_value = 0.0;
    const std::string* content = nullptr;  // borrowed from the store
};

struct PromptContext {
    std::string system_prompt;
    std::vector<std::string> recent_conversation;  // last c ask texts
    std::vector<InjectedItem> injected;            // |injected| <= n
    std::string assembled;
    size_t token_count = 0;  // whitespace tokens of `assembled`
};

}  // namespace amvl
