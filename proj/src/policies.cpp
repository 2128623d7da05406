#include "amvl/policies.hpp"

#include <algorithm>

#include "amvl/rng.hpp"
#include "amvl/vector_engine.hpp"

namespace amvl {

namespace {

// Splits candidates into (selected-order preserved) matches and the rest.
// Throws if any selected id is not a candidate. Cost O(|R| log |S|).
std::vector<ItemId> complement_of_selected(const CandidateSet& candidates,
                                           std::span<const ItemId> selected) {
    std::vector<ItemId> sorted_sel(selected.begin(), selected.end());
    std::sort(sorted_sel.begin(), sorted_sel.end());
    std::vector<ItemId> rest;
    rest.reserve(candidates.ids.size());
    size_t matched = 0;
    for (ItemId id : candidates.ids) {
        if (std::binary_search(sorted_sel.begin(), sorted_sel.end(), id)) {
            ++matched;
        } else {
            rest.push_back(id);
        }
    }
    if (matched < sorted_sel.size()) {
        throw Error(ErrorCode::FeedbackOutsideCandidates,
                    "selected set is not a subset of the candidate set");
    }
    return rest;
}

}  // namespace

AmvlPolicy::AmvlPolicy(Store& store, LifecycleManager& lifecycle, const RetrievalConfig& cfg,
                       uint64_t run_seed)
    : store_(store), lifecycle_(lifecycle), cfg_(cfg), run_seed_(run_seed) {}

CandidateSet AmvlPolicy::build_candidates(double t_now, uint64_t request_index) {
    CandidateSet set;
    set.policy = PolicyKind::AMVL;
    set.built_at = t_now;
    store_.append_hot_ids(set.ids);
    set.hot_count = set.ids.size();
    if (cfg_.warm_mode == WarmMode::Random) {
        DetRng rng = DetRng::derive(run_seed_, request_index, fnv1a("warm_sample"));
        store_.sample_warm_random(cfg_.warm_budget_k, rng, set.ids);
    } else {
        store_.sample_warm_recent(cfg_.warm_budget_k, set.ids);
    }
    set.warm_count = set.ids.size() - set.hot_count;
    return set;
}

void AmvlPolicy::on_feedback(const CandidateSet& candidates, std::span<const ItemId> selected,
                             double t_now) {
    std::vector<ItemId> access_only = complement_of_selected(candidates, selected);
    lifecycle_.apply_usage_batch(selected, access_only, t_now);
}

TtlPolicy::TtlPolicy(Store& store, VectorEngine* engine, double window)
    : store_(store), engine_(engine), window_(window) {}

CandidateSet TtlPolicy::build_candidates(double t_now, uint64_t /*request_index*/) {
    CandidateSet set;
    set.policy = PolicyKind::TTL;
    set.built_at = t_now;
    std::vector<ItemId> expired = store_.append_ttl_live(t_now, window_, set.ids);
    for (ItemId id : expired) {
        store_.evict(id);
        if (engine_ && engine_->contains(id)) engine_->remove_vector(id);
    }
    set.hot_count = 0;
    set.warm_count = 0;
    return set;
}

void TtlPolicy::on_feedback(const CandidateSet& /*candidates*/, std::span<const ItemId> /*selected*/,
                            double /*t_now*/) {
    // retention-only policy: no value or recency state to update
}

LruPolicy::LruPolicy(Store& store, uint32_t capacity) : store_(store), capacity_(capacity) {}

CandidateSet LruPolicy::build_candidates(double t_now, uint64_t /*request_index*/) {
    CandidateSet set;
    set.policy = PolicyKind::LRU;
    set.built_at = t_now;
    store_.append_lru_front(capacity_, set.ids);
    set.hot_count = 0;
    set.warm_count = 0;
    return set;
}

void LruPolicy::on_feedback(const CandidateSet& candidates, std::span<const ItemId> selected,
                            double t_now) {
    std::vector<ItemId> rest = complement_of_selected(candidates, selected);
    // Refresh everything touched; splice order makes selected items end up
    // most recent (rank 1 at the MRU front), then the untouched remainder in
    // its prior relative order.
    std::vector<ItemId> splice_order;
    splice_order.reserve(candidates.ids.size());
    for (auto it = rest.rbegin(); it != rest.rend(); ++it) splice_order.push_back(*it);
    for (auto it = std::rbegin(selected); it != std::rend(selected); ++it) {
        splice_order.push_back(*it);
    }
    store_.lru_refresh(splice_order, t_now);
}

std::unique_ptr<EligibilityPolicy> make_policy(PolicyKind kind, Store& store, VectorEngine* engine,
                                               LifecycleManager& lifecycle,
                                               const RetrievalConfig& retrieval,
                                               const PolicyConfig& policy, uint64_t run_seed,
                                               double resolved_ttl_window) {
    switch (kind) {
        case PolicyKind::AMVL:
            return std::make_unique<AmvlPolicy>(store, lifecycle, retrieval, run_seed);
        case PolicyKind::TTL:
            return std::make_unique<TtlPolicy>(store, engine, resolved_ttl_window);
        case PolicyKind::LRU:
            return std::make_unique<LruPolicy>(store, policy.lru_capacity);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown policy kind");
}

}  // namespace amvl
