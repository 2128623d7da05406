#pragma once

#include <memory>
#include <span>

#include "amvl/config.hpp"
#include "amvl/lifecycle.hpp"
#include "amvl/store.hpp"
#include "amvl/types.hpp"

namespace amvl {

// Produces the per-request retrieval-eligible set R and consumes feedback.
// Policies never see label_value; they receive only ids and store metadata.
class EligibilityPolicy {
public:
    virtual ~EligibilityPolicy() = default;

    virtual PolicyKind kind() const = 0;
    virtual CandidateSet build_candidates(double t_now, uint64_t request_index) = 0;

    // selected must be a subset of candidates.ids (FeedbackOutsideCandidates
    // otherwise). selected arrives in scan-rank order.
    virtual void on_feedback(const CandidateSet& candidates, std::span<const ItemId> selected,
                             double t_now) = 0;
};

// R = T_H ∪ Sample_k(T_W); |R| <= |T_H| + k. Feedback: selected items get
// access+contribution, the rest of R access only.
class AmvlPolicy : public EligibilityPolicy {
public:
    AmvlPolicy(Store& store, LifecycleManager& lifecycle, const RetrievalConfig& cfg,
               uint64_t run_seed);

    PolicyKind kind() const override { return PolicyKind::AMVL; }
    CandidateSet build_candidates(double t_now, uint64_t request_index) override;
    void on_feedback(const CandidateSet& candidates, std::span<const ItemId> selected,
                     double t_now) override;

private:
    Store& store_;
    LifecycleManager& lifecycle_;
    RetrievalConfig cfg_;
    uint64_t run_seed_;
};

// All non-expired items are eligible; expired items are evicted lazily at
// build time and by sweeps. No feedback.
class TtlPolicy : public EligibilityPolicy {
public:
    TtlPolicy(Store& store, VectorEngine* engine, double window);

    PolicyKind kind() const override { return PolicyKind::TTL; }
    CandidateSet build_candidates(double t_now, uint64_t request_index) override;
    void on_feedback(const CandidateSet& candidates, std::span<const ItemId> selected,
                     double t_now) override;

    double window() const { return window_; }

private:
    Store& store_;
    VectorEngine* engine_;
    double window_;
};

// Working-set LRU: the `capacity` most recently used items are eligible;
// items that fall out stay stored but ineligible.
class LruPolicy : public EligibilityPolicy {
public:
    LruPolicy(Store& store, uint32_t capacity);

    PolicyKind kind() const override { return PolicyKind::LRU; }
    CandidateSet build_candidates(double t_now, uint64_t request_index) override;
    void on_feedback(const CandidateSet& candidates, std::span<const ItemId> selected,
                     double t_now) override;

private:
    Store& store_;
    uint32_t capacity_;
};

std::unique_ptr<EligibilityPolicy> make_policy(PolicyKind kind, Store& store,
                                               VectorEngine* engine, LifecycleManager& lifecycle,
                                               const RetrievalConfig& retrieval,
                                               const PolicyConfig& policy, uint64_t run_seed,
                                               double resolved_ttl_window);

}  // namespace amvl
