#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "amvl/clock.hpp"
#include "amvl/config.hpp"
#include "amvl/store.hpp"
#include "amvl/telemetry.hpp"
#include "amvl/types.hpp"
#include "amvl/vector_engine.hpp"

namespace amvl {

// Hysteresis tier map: promotion requires crossing the up-threshold,
// demotion the down-threshold; values inside a band leave the tier alone.
// Up-thresholds are inclusive (>=), down-thresholds strict (<).
Tier next_tier(Tier current, double v, const LifecycleThresholds& t);

// Bounded MPSC queue of pending tier changes. Overflow drops the entry:
// tier is derived from value, so the next sweep reconciles anything lost.
class TransitionQueue {
public:
    explicit TransitionQueue(size_t cap) : cap_(cap) {}

    bool push(const TierTransition& t) {
        std::lock_guard lock(mutex_);
        if (entries_.size() >= cap_) {
            ++dropped_;
            return false;
        }
        entries_.push_back(t);
        return true;
    }

    std::vector<TierTransition> drain() {
        std::lock_guard lock(mutex_);
        std::vector<TierTransition> out;
        out.swap(entries_);
        return out;
    }

    uint64_t dropped() const {
        std::lock_guard lock(mutex_);
        return dropped_;
    }

private:
    mutable std::mutex mutex_;
    size_t cap_;
    std::vector<TierTransition> entries_;
    uint64_t dropped_ = 0;
};

// Applies value updates on the request path and tier transitions off it.
// Request handlers only ever write value/timestamp fields; tier index
// migrations, evictions and decay sweeps happen in maintenance_sweep, which
// runs on exactly one thread of control at a time.
class LifecycleManager {
public:
    // ttl_window only matters when the store runs the TTL policy: sweeps then
    // enforce retention by age instead of value decay. Under LRU, sweeps emit
    // snapshots only (working-set LRU never deletes).
    LifecycleManager(Store& store, VectorEngine* engine, const ValueParams& params,
                     const LifecycleThresholds& thresholds, const LifecycleConfig& cfg,
                     Clock& clock, TelemetrySink* sink = nullptr, double ttl_window = 0.0);
    ~LifecycleManager();

    // Value update for one usage event; enqueues any implied tier change.
    std::optional<TierTransition> apply_usage(const UsageEvent& event);

    // Feedback fan-out for one request: contributed ids get access+contrib,
    // touched ids access only. One lock hold per group.
    void apply_usage_batch(std::span<const ItemId> contributed,
                           std::span<const ItemId> access_only, double t_now);

    SweepReport maintenance_sweep(double t_now);

    // Runs sweeps for every interval deadline passed by the clock. Called
    // between requests (bench) or post-response (gateway).
    size_t maybe_sweep();

    void start_background(double wall_interval_s);
    void stop_background();

    // Observer for applied transitions (tests, audit). Called on the sweep thread.
    void set_transition_observer(std::function<void(const TierTransition&)> fn);

    uint64_t transitions_applied() const { return transitions_applied_.load(); }
    uint64_t queue_dropped() const { return queue_.dropped(); }

private:
    struct SweepCounts {
        size_t promoted = 0;
        size_t demoted = 0;
        size_t evicted = 0;
    };

    // Steps the item's tier to its fixed point for the current value and
    // evicts cold items below theta_e; records each one-tier step.
    void reconcile_tier(ItemId id, double t_now, SweepCounts& counts);
    SweepReport sweep_locked(double t_now);

    Store& store_;
    VectorEngine* engine_;
    ValueParams params_;
    LifecycleThresholds thresholds_;
    LifecycleConfig cfg_;
    Clock& clock_;
    TelemetrySink* sink_;
    double ttl_window_;

    TransitionQueue queue_;
    ItemId sweep_cursor_ = 0;
    double next_deadline_;
    std::mutex sweep_mutex_;  // sweeps are single-threaded

    std::function<void(const TierTransition&)> observer_;
    std::atomic<uint64_t> transitions_applied_{0};

    std::atomic<bool> background_running_{false};
    std::thread background_;
};

}  // namespace amvl
