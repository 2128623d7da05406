#pragma once

#include <deque>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "amvl/clock.hpp"
#include "amvl/config.hpp"
#include "amvl/lifecycle.hpp"
#include "amvl/policies.hpp"
#include "amvl/store.hpp"
#include "amvl/telemetry.hpp"
#include "amvl/types.hpp"
#include "amvl/vector_engine.hpp"

namespace amvl {

// Whitespace token count: a token is a maximal non-whitespace run. This is
// the normative tokenizer for every token_count in telemetry and reports.
size_t count_tokens(std::string_view text);

// Deterministic mock embedder: each whitespace token maps to a pseudo-random
// unit vector seeded by (embed_seed, fnv1a(token)); the text embedding is the
// normalized sum (repeated tokens weigh more). Identical text gives an
// identical vector, and texts sharing dominant tokens land close in cosine.
class Embedder {
public:
    Embedder(uint32_t dim, uint64_t seed);

    std::vector<float> embed(std::string_view text) const;

    uint32_t dim() const { return dim_; }

private:
    const std::vector<double>& token_vector(uint64_t token_hash) const;

    uint32_t dim_;
    uint64_t seed_;
    mutable std::shared_mutex cache_mutex_;
    mutable std::unordered_map<uint64_t, std::vector<double>> cache_;
};

struct RecallResult {
    std::vector<ScanHit> hits;
    std::vector<InjectedRead> injected;  // same order as hits
    CandidateSet candidates;
    size_t vectors_scanned = 0;
    RequestRecord record;
};

struct AskResult {
    std::string answer;
    std::vector<ItemId> citations;
    size_t token_count = 0;
    RecallResult recall;
};

// Per-request path: embed -> candidates -> allowlist scan -> top-n -> prompt
// -> feedback -> telemetry. No tier migration, eviction, or sweep work runs
// in here; RequestPathGuard instrumentation enforces that.
class Pipeline {
public:
    Pipeline(Store& store, VectorEngine& engine, LifecycleManager& lifecycle,
             EligibilityPolicy& policy, const Embedder& embedder,
             const RetrievalConfig& retrieval, const PipelineConfig& cfg, Clock& clock,
             TelemetrySink* sink);

    // Write path: embed content, store, index. Emits a write record.
    ItemId write(const std::string& content, double label_value, double t_virtual,
                 uint64_t request_index, const std::string& namespace_tag = "default");

    // cap_override, when nonzero, must be <= prompt_cap_n (CapExceeded).
    RecallResult recall(const AskRequest& req, uint32_t cap_override = 0);
    AskResult ask(const AskRequest& req);

    const RetrievalConfig& retrieval_config() const { return retrieval_; }

private:
    RecallResult recall_inner(const AskRequest& req, uint32_t cap, bool defer_record);
    void emit(RequestRecord& rec);
    std::string assemble_prompt(const AskRequest& req, const std::vector<InjectedRead>& injected);

    Store& store_;
    VectorEngine& engine_;
    LifecycleManager& lifecycle_;
    EligibilityPolicy& policy_;
    const Embedder& embedder_;
    RetrievalConfig retrieval_;
    PipelineConfig cfg_;
    Clock& clock_;
    TelemetrySink* sink_;

    std::mutex conv_mutex_;
    std::unordered_map<std::string, std::deque<std::string>> conversations_;
};

}  // namespace amvl
