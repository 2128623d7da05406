#pragma once

#include <atomic>
#include <deque>
#include <fstream>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "amvl/config.hpp"
#include "amvl/errors.hpp"
#include "amvl/rng.hpp"
#include "amvl/types.hpp"

namespace amvl {

// Marks the current thread as executing inside a recall/ask handler. Tier
// migrations, evictions, and sweep batches performed while the flag is set
// are counted as request-path violations; the acceptance suite asserts the
// count stays zero.
class RequestPathGuard {
public:
    RequestPathGuard();
    ~RequestPathGuard();
    RequestPathGuard(const RequestPathGuard&) = delete;
    RequestPathGuard& operator=(const RequestPathGuard&) = delete;

    static bool active();
};

struct RequestPathViolations {
    uint64_t tier_migrations = 0;
    uint64_t evictions = 0;
    uint64_t sweep_batches = 0;

    uint64_t total() const { return tier_migrations + evictions + sweep_batches; }
};

// Insertion-ordered id set with O(1) insert/erase/contains and O(1)
// index access for sampling.
class IndexedIdSet {
public:
    bool insert(ItemId id) {
        if (pos_.count(id)) return false;
        pos_.emplace(id, ids_.size());
        ids_.push_back(id);
        return true;
    }

    bool erase(ItemId id) {
        auto it = pos_.find(id);
        if (it == pos_.end()) return false;
        size_t idx = it->second;
        ItemId last = ids_.back();
        ids_[idx] = last;
        pos_[last] = idx;
        ids_.pop_back();
        pos_.erase(it);
        return true;
    }

    bool contains(ItemId id) const { return pos_.count(id) != 0; }
    size_t size() const { return ids_.size(); }
    ItemId at(size_t idx) const { return ids_[idx]; }
    const std::vector<ItemId>& ids() const { return ids_; }

private:
    std::vector<ItemId> ids_;
    std::unordered_map<ItemId, size_t> pos_;
};

// Partial mutation applied as one indivisible step.
struct UpdateDelta {
    std::optional<double> value;
    std::optional<Tier> tier;
    std::optional<double> t_last;
    std::optional<double> t_last_access;
};

// Result of a read-compute step inside an atomic value update.
struct ValueWrite {
    double value = 0.0;
    double t_last = 0.0;
    bool touch_access = false;  // also set t_last_access = t_last
};

struct StoreStats {
    uint64_t total_puts = 0;
    uint64_t evictions = 0;
    uint64_t tier_migrations = 0;
    size_t stored = 0;  // non-evicted
    size_t hot = 0;
    size_t warm = 0;
    size_t cold = 0;
};

// Fields the prompt assembler needs, copied under one lock hold.
struct InjectedRead {
    ItemId id = 0;
    double label_value = 0.0;
    std::string content;
};

// Items keyed by dense monotone ids (item id N lives at slot N-1), tier
// membership as metadata index sets, and optional TTL/LRU structures for
// the baseline policies. Readers share; writers are serialized, and index
// adjustments happen in the same critical section as the item mutation.
class Store {
public:
    Store(const StoreConfig& cfg, uint32_t embedding_dim, PolicyKind active_policy,
          const ValueParams& params, const LifecycleThresholds& thresholds);
    ~Store();

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    ItemId put(std::string content, std::vector<float> embedding, double label_value, double t,
               std::string namespace_tag = "default");

    // Throws NotFound for never-allocated ids, Evicted for tombstones.
    MemoryItem get(ItemId id) const;
    bool exists(ItemId id) const;  // allocated and not evicted

    MemoryItem update_item_atomic(ItemId id, const UpdateDelta& delta);

    // Atomic read-compute-write for a batch of ids under one lock hold; fn
    // sees the current item and returns the fields to write (or nullopt to
    // leave it untouched). Missing/evicted ids are skipped.
    void update_values(std::span<const ItemId> ids,
                       const std::function<std::optional<ValueWrite>(const MemoryItem&)>& fn);

    // Tier change with index adjustment; returns previous tier.
    Tier set_tier(ItemId id, Tier to);

    void evict(ItemId id);

    // --- candidate-building support (shared lock) ---
    void append_hot_ids(std::vector<ItemId>& out) const;
    void sample_warm_random(size_t k, DetRng& rng, std::vector<ItemId>& out) const;
    void sample_warm_recent(size_t k, std::vector<ItemId>& out) const;
    // TTL: appends live ids in creation order and returns ids expired at t_now
    // (caller decides to evict them).
    std::vector<ItemId> append_ttl_live(double t_now, double window,
                                        std::vector<ItemId>& out) const;
    // TTL: just the expired prefix (sweep path).
    std::vector<ItemId> ttl_expired_prefix(double t_now, double window) const;
    // LRU: the `capacity` most recently used ids, MRU first.
    void append_lru_front(size_t capacity, std::vector<ItemId>& out) const;
    // Move ids to the MRU end in the given order (last argument ends up MRU).
    void lru_refresh(std::span<const ItemId> ids, double t_now);

    // Round-robin sweep support: up to `batch` non-evicted ids starting
    // after `cursor` in id order, wrapping; returns the new cursor.
    ItemId collect_sweep_batch(ItemId cursor, size_t batch, std::vector<ItemId>& out) const;

    // Copies id/label/content for the injected hits; skips vanished ids.
    std::vector<InjectedRead> read_for_injection(std::span<const ScanHit> hits) const;

    size_t tier_size(Tier t) const;
    std::vector<ItemId> tier_ids_snapshot(Tier t) const;
    size_t stored_count() const;  // non-evicted
    uint64_t total_puts() const;
    StoreStats stats() const;
    uint32_t embedding_dim() const { return dim_; }
    PolicyKind active_policy() const { return policy_; }

    // Debug sweep for the partition invariant: every non-evicted id in
    // exactly one tier set and counts match.
    bool check_partition() const;

    RequestPathViolations request_path_violations() const;
    void count_sweep_batch_on_request_path();

    void snapshot(const std::string& path) const;
    static std::unique_ptr<Store> restore(const std::string& path, const StoreConfig& cfg,
                                          PolicyKind active_policy, const ValueParams& params,
                                          const LifecycleThresholds& thresholds);
    void replay_wal(const std::string& path);

private:
    MemoryItem& slot(ItemId id);
    const MemoryItem& slot(ItemId id) const;
    void require_live(ItemId id) const;
    void set_tier_locked(ItemId id, Tier to);
    void wal_append(const std::string& line);
    Tier initial_tier_for(double v) const;

    StoreConfig cfg_;
    uint32_t dim_;
    PolicyKind policy_;
    ValueParams params_;
    LifecycleThresholds thresholds_;

    mutable std::shared_mutex mutex_;
    std::deque<MemoryItem> items_;  // slot i holds id i+1; deque keeps references stable
    IndexedIdSet tiers_[3];
    size_t stored_ = 0;

    // TTL policy state: creation order equals expiry order.
    std::deque<ItemId> ttl_queue_;
    // LRU policy state: front = MRU.
    std::list<ItemId> lru_list_;
    std::unordered_map<ItemId, std::list<ItemId>::iterator> lru_pos_;

    std::ofstream wal_;
    uint64_t eviction_count_ = 0;
    uint64_t migration_count_ = 0;

    std::atomic<uint64_t> rp_migrations_{0};
    std::atomic<uint64_t> rp_evictions_{0};
    std::atomic<uint64_t> rp_sweep_batches_{0};
};

}  // namespace amvl
