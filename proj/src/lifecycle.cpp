#include "amvl/lifecycle.hpp"

#include <chrono>

#include "amvl/value_model.hpp"

namespace amvl {

Tier next_tier(Tier current, double v, const LifecycleThresholds& t) {
    switch (current) {
        case Tier::Hot:
            return v < t.theta_h_down ? Tier::Warm : Tier::Hot;
        case Tier::Warm:
            if (v >= t.theta_h_up) return Tier::Hot;
            if (v < t.theta_w_down) return Tier::Cold;
            return Tier::Warm;
        case Tier::Cold:
            return v >= t.theta_w_up ? Tier::Warm : Tier::Cold;
    }
    return current;
}

LifecycleManager::LifecycleManager(Store& store, VectorEngine* engine, const ValueParams& params,
                                   const LifecycleThresholds& thresholds,
                                   const LifecycleConfig& cfg, Clock& clock, TelemetrySink* sink,
                                   double ttl_window)
    : store_(store), engine_(engine), params_(params), thresholds_(thresholds), cfg_(cfg),
      clock_(clock), sink_(sink), ttl_window_(ttl_window), queue_(cfg.transition_queue_cap),
      next_deadline_(cfg.sweep_interval) {}

LifecycleManager::~LifecycleManager() { stop_background(); }

std::optional<TierTransition> LifecycleManager::apply_usage(const UsageEvent& event) {
    if (event.contrib && !event.access) {
        throw Error(ErrorCode::InvalidArgument, "contribution implies access");
    }
    store_.get(event.item_id);  // throws NotFound / Evicted
    std::optional<TierTransition> queued;
    ItemId ids[1] = {event.item_id};
    store_.update_values(ids, [&](const MemoryItem& item) -> std::optional<ValueWrite> {
        auto up = updated_value(item.value, item.t_last, event, params_);
        Tier want = next_tier(item.tier, up.value, thresholds_);
        if (want != item.tier) {
            TierTransition t;
            t.item_id = item.id;
            t.from_tier = item.tier;
            t.to_tier = want;
            t.value_at_transition = up.value;
            t.t = event.t_now;
            t.cause = static_cast<int>(want) < static_cast<int>(item.tier)
                          ? TransitionCause::Promotion
                          : TransitionCause::Demotion;
            queue_.push(t);
            queued = t;
        }
        return ValueWrite{up.value, up.t_last, event.access};
    });
    return queued;
}

void LifecycleManager::apply_usage_batch(std::span<const ItemId> contributed,
                                         std::span<const ItemId> access_only, double t_now) {
    // Single-entry decay memo: touched items usually share t_last (they were
    // all updated by the same earlier request), so the exp() result repeats.
    double memo_dt = -1.0;
    double memo_factor = 1.0;
    auto decay_factor = [&](double dt) {
        if (dt != memo_dt) {
            memo_dt = dt;
            memo_factor = dt == 0.0 ? 1.0 : std::exp(-params_.lambda * dt);
        }
        return memo_factor;
    };

    auto make_update = [&](bool contrib) {
        double reward = params_.alpha + (contrib ? params_.beta : 0.0);
        return [this, &decay_factor, reward, t_now](const MemoryItem& item)
                   -> std::optional<ValueWrite> {
            double dt = t_now - item.t_last;
            if (dt < 0.0) {
                throw Error(ErrorCode::ClockRegression, "usage event before item t_last");
            }
            double v = item.value * decay_factor(dt);
            if (v < 1e-300) v = 0.0;
            v = std::min(v + reward, params_.v_max);
            Tier want = next_tier(item.tier, v, thresholds_);
            if (want != item.tier) {
                TierTransition t;
                t.item_id = item.id;
                t.from_tier = item.tier;
                t.to_tier = want;
                t.value_at_transition = v;
                t.t = t_now;
                t.cause = static_cast<int>(want) < static_cast<int>(item.tier)
                              ? TransitionCause::Promotion
                              : TransitionCause::Demotion;
                queue_.push(t);
            }
            return ValueWrite{v, t_now, true};
        };
    };

    store_.update_values(contributed, make_update(true));
    store_.update_values(access_only, make_update(false));
}

void LifecycleManager::reconcile_tier(ItemId id, double t_now, SweepCounts& counts) {
    for (int step = 0; step < 3; ++step) {
        MemoryItem item;
        try {
            item = store_.get(id);
        } catch (const Error&) {
            return;  // vanished mid-sweep
        }
        if (item.tier == Tier::Cold && item.value < thresholds_.theta_e) {
            store_.evict(id);
            if (engine_ && engine_->contains(id)) engine_->remove_vector(id);
            ++counts.evicted;
            TierTransition t{id, Tier::Cold, Tier::Cold, item.value, t_now,
                             TransitionCause::Eviction};
            transitions_applied_.fetch_add(1, std::memory_order_relaxed);
            if (observer_) observer_(t);
            return;
        }
        Tier want = next_tier(item.tier, item.value, thresholds_);
        if (want == item.tier) return;
        store_.set_tier(id, want);
        bool promotion = static_cast<int>(want) < static_cast<int>(item.tier);
        if (promotion) {
            ++counts.promoted;
        } else {
            ++counts.demoted;
        }
        TierTransition t{id, item.tier, want, item.value, t_now,
                         promotion ? TransitionCause::Promotion : TransitionCause::Demotion};
        transitions_applied_.fetch_add(1, std::memory_order_relaxed);
        if (observer_) observer_(t);
    }
}

SweepReport LifecycleManager::maintenance_sweep(double t_now) {
    std::lock_guard sweep_lock(sweep_mutex_);
    return sweep_locked(t_now);
}

SweepReport LifecycleManager::sweep_locked(double t_now) {
    store_.count_sweep_batch_on_request_path();
    SweepReport report;
    SweepCounts counts;
    PolicyKind active = store_.active_policy();

    if (active == PolicyKind::AMVL) {
        // 1. reconcile queued transitions against current values
        auto queued = queue_.drain();
        for (const auto& t : queued) {
            reconcile_tier(t.item_id, t_now, counts);
        }
        report.queue_applied = queued.size();

        // 2. cursor batch: lazy decay, then tier/eviction reconciliation
        std::vector<ItemId> batch;
        batch.reserve(cfg_.sweep_batch);
        sweep_cursor_ = store_.collect_sweep_batch(sweep_cursor_, cfg_.sweep_batch, batch);
        size_t decayed = 0;
        store_.update_values(batch, [&](const MemoryItem& item) -> std::optional<ValueWrite> {
            double dt = t_now - item.t_last;
            if (dt <= 0.0) return std::nullopt;  // touched at or after t_now; nothing to do
            double v = decay_only(item.value, item.t_last, t_now, params_.lambda);
            ++decayed;
            return ValueWrite{v, t_now, false};
        });
        for (ItemId id : batch) {
            reconcile_tier(id, t_now, counts);
        }
        report.visited = batch.size();
        report.decayed = decayed;
    } else if (active == PolicyKind::TTL && ttl_window_ > 0.0) {
        // retention enforcement by age
        std::vector<ItemId> expired = store_.ttl_expired_prefix(t_now, ttl_window_);
        for (ItemId id : expired) {
            MemoryItem item = store_.get(id);
            store_.evict(id);
            if (engine_ && engine_->contains(id)) engine_->remove_vector(id);
            ++counts.evicted;
            TierTransition t{id, item.tier, item.tier, item.value, t_now,
                             TransitionCause::Eviction};
            transitions_applied_.fetch_add(1, std::memory_order_relaxed);
            if (observer_) observer_(t);
        }
        report.visited = expired.size();
    }
    // LRU: working-set membership never deletes; sweeps only snapshot

    report.promoted = counts.promoted;
    report.demoted = counts.demoted;
    report.evicted = counts.evicted;

    if (sink_) {
        LifecycleSnapshotRecord rec;
        rec.ts_wall_us = wall_micros();
        rec.t_virtual = t_now;
        StoreStats s = store_.stats();
        rec.hot = s.hot;
        rec.warm = s.warm;
        rec.cold = s.cold;
        rec.stored = s.stored;
        rec.evicted_total = s.evictions;
        rec.sweep_visited = report.visited;
        rec.sweep_promoted = report.promoted;
        rec.sweep_demoted = report.demoted;
        rec.sweep_evicted = report.evicted;
        rec.cursor = sweep_cursor_;
        sink_->write_line(format_lifecycle_line(rec));
    }
    return report;
}

size_t LifecycleManager::maybe_sweep() {
    std::lock_guard sweep_lock(sweep_mutex_);
    size_t ran = 0;
    double now = clock_.now();
    while (now >= next_deadline_) {
        sweep_locked(now);
        next_deadline_ += cfg_.sweep_interval;
        ++ran;
    }
    return ran;
}

void LifecycleManager::start_background(double wall_interval_s) {
    if (background_running_.exchange(true)) return;
    background_ = std::thread([this, wall_interval_s] {
        while (background_running_.load()) {
            std::this_thread::sleep_for(std::chrono::duration<double>(wall_interval_s));
            if (!background_running_.load()) break;
            maintenance_sweep(clock_.now());
        }
    });
}

void LifecycleManager::stop_background() {
    if (!background_running_.exchange(false)) return;
    if (background_.joinable()) background_.join();
}

void LifecycleManager::set_transition_observer(std::function<void(const TierTransition&)> fn) {
    observer_ = std::move(fn);
}

}  // namespace amvl
