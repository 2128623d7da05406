#include "amvl/acceptance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <list>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "amvl/harness.hpp"
#include "amvl/lifecycle.hpp"
#include "amvl/rng.hpp"
#include "amvl/value_model.hpp"
#include "amvl/vector_engine.hpp"

namespace amvl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const RunReport* find_report(const std::vector<RunReport>& reports, const std::string& policy) {
    for (const auto& r : reports) {
        if (r.policy == policy) return &r;
    }
    return nullptr;
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), format, args...);
    return buf;
}

CriterionResult check_eligibility_bound(const std::vector<RunReport>& reports) {
    CriterionResult c{1, "eligibility bound |R| <= |T_H| + k (AMV-L, every request)", false, ""};
    const RunReport* amvl = find_report(reports, "amvl");
    if (!amvl) {
        c.detail = "amvl run missing";
        return c;
    }
    uint64_t retrievals = amvl->recalls + amvl->asks;
    c.pass = retrievals > 0 && amvl->eligibility_bound_violations == 0;
    c.detail = fmt("%llu retrieval requests, %llu violations",
                   static_cast<unsigned long long>(retrievals),
                   static_cast<unsigned long long>(amvl->eligibility_bound_violations));
    return c;
}

CriterionResult check_footprint(const std::vector<RunReport>& reports) {
    CriterionResult c{2, "footprint ordering LRU < AMV-L < TTL with ratio floors", false, ""};
    const RunReport* ttl = find_report(reports, "ttl");
    const RunReport* lru = find_report(reports, "lru");
    const RunReport* amvl = find_report(reports, "amvl");
    if (!ttl || !lru || !amvl) {
        c.detail = "requires ttl, lru and amvl runs";
        return c;
    }
    bool order = lru->retrieval_set_p95 < amvl->retrieval_set_p95 &&
                 amvl->retrieval_set_p95 < ttl->retrieval_set_p95 &&
                 lru->vectors_scanned_p95 < amvl->vectors_scanned_p95 &&
                 amvl->vectors_scanned_p95 < ttl->vectors_scanned_p95;
    double r_amvl = amvl->retrieval_set_p95 > 0 ? ttl->retrieval_set_p95 / amvl->retrieval_set_p95
                                                : 0.0;
    double r_lru = lru->retrieval_set_p95 > 0 ? ttl->retrieval_set_p95 / lru->retrieval_set_p95
                                              : 0.0;
    double s_amvl = amvl->vectors_scanned_p95 > 0
                        ? ttl->vectors_scanned_p95 / amvl->vectors_scanned_p95
                        : 0.0;
    double s_lru = lru->vectors_scanned_p95 > 0
                       ? ttl->vectors_scanned_p95 / lru->vectors_scanned_p95
                       : 0.0;
    c.pass = order && r_amvl >= 3.0 && r_lru >= 5.0 && s_amvl >= 3.0 && s_lru >= 5.0;
    c.detail = fmt("p95 |R| ttl=%.0f lru=%.0f amvl=%.0f, ttl/amvl=%.2fx ttl/lru=%.2fx",
                   ttl->retrieval_set_p95, lru->retrieval_set_p95, amvl->retrieval_set_p95, r_amvl,
                   r_lru);
    return c;
}

CriterionResult check_quality(const std::vector<RunReport>& reports) {
    CriterionResult c{3, "retrieval quality: value means and high-value share vs TTL", false, ""};
    const RunReport* ttl = find_report(reports, "ttl");
    const RunReport* lru = find_report(reports, "lru");
    const RunReport* amvl = find_report(reports, "amvl");
    if (!ttl || !lru || !amvl) {
        c.detail = "requires ttl, lru and amvl runs";
        return c;
    }
    bool means = amvl->retrieved_value_mean >= 1.2 * ttl->retrieved_value_mean &&
                 lru->retrieved_value_mean >= 1.2 * ttl->retrieved_value_mean;
    bool close = lru->retrieved_value_mean > 0 &&
                 std::abs(amvl->retrieved_value_mean - lru->retrieved_value_mean) <=
                     0.02 * lru->retrieved_value_mean;
    bool share = amvl->high_value_share_pct >= 1.5 * ttl->high_value_share_pct &&
                 lru->high_value_share_pct >= 1.5 * ttl->high_value_share_pct;
    c.pass = means && close && share;
    c.detail = fmt("value mean ttl=%.3f lru=%.3f amvl=%.3f; hv share ttl=%.1f%% lru=%.1f%% "
                   "amvl=%.1f%%",
                   ttl->retrieved_value_mean, lru->retrieved_value_mean,
                   amvl->retrieved_value_mean, ttl->high_value_share_pct,
                   lru->high_value_share_pct, amvl->high_value_share_pct);
    return c;
}

CriterionResult check_cap(const std::vector<RunReport>& reports, const EngineConfig& cfg) {
    CriterionResult c{4, "cap invariance: injected = min(n, available), p95 identical across runs",
                      false, ""};
    bool ok = !reports.empty();
    double first_chunks = reports.empty() ? 0.0 : reports.front().chunks_p95;
    for (const auto& r : reports) {
        ok = ok && r.cap_violations == 0 && r.injection_mismatches == 0 &&
             r.chunks_p95 <= cfg.retrieval.prompt_cap_n && r.chunks_p95 == first_chunks &&
             r.memrefs_p95 <= cfg.retrieval.prompt_cap_n;
    }
    c.pass = ok;
    c.detail = fmt("chunks p95 = %.0f (n = %u) across %zu runs", first_chunks,
                   cfg.retrieval.prompt_cap_n, reports.size());
    return c;
}

CriterionResult check_tail(const std::vector<RunReport>& reports) {
    CriterionResult c{5, "tail direction: TTL p99 >= 2x AMV-L p99 (or scan proxy >= 3x)", false,
                      ""};
    const RunReport* ttl = find_report(reports, "ttl");
    const RunReport* amvl = find_report(reports, "amvl");
    if (!ttl || !amvl) {
        c.detail = "requires ttl and amvl runs";
        return c;
    }
    double lat_ratio = amvl->latency_overall.p99_ms > 0
                           ? ttl->latency_overall.p99_ms / amvl->latency_overall.p99_ms
                           : 0.0;
    double scan_ratio = amvl->vectors_scanned_p99 > 0
                            ? ttl->vectors_scanned_p99 / amvl->vectors_scanned_p99
                            : 0.0;
    c.pass = lat_ratio >= 2.0 || scan_ratio >= 3.0;
    c.detail = fmt("p99 latency ratio %.2fx (ttl %.3f ms / amvl %.3f ms); p99 scan proxy %.2fx",
                   lat_ratio, ttl->latency_overall.p99_ms, amvl->latency_overall.p99_ms,
                   scan_ratio);
    return c;
}

// --- criterion 6: value model vs sequential long-double oracle ---

CriterionResult check_value_model() {
    CriterionResult c{6, "value model matches brute-force oracle on 10,000 sequences", false, ""};
    DetRng rng(20260801);
    double worst = 0.0;
    for (int seq = 0; seq < 10000; ++seq) {
        ValueParams p;
        p.alpha = 0.01 + rng.next_double() * 1.99;
        p.beta = p.alpha + rng.next_double() * 2.0;
        p.lambda = 1e-4 + rng.next_double() * 0.1;
        p.v_max = 5.0 + rng.next_double() * 195.0;
        p.v_init = rng.next_double() * p.v_max;

        double v = p.v_init;
        double t_last = 0.0;
        long double ov = static_cast<long double>(p.v_init);
        long double ot = 0.0L;
        double t = 0.0;
        int events = 2 + static_cast<int>(rng.next_below(12));
        for (int e = 0; e < events; ++e) {
            t += rng.next_double() * 300.0;
            bool access = rng.next_below(2) == 1;
            bool contrib = access && rng.next_below(2) == 1;
            UsageEvent ev{1, access, contrib, t};
            auto up = updated_value(v, t_last, ev, p);
            v = up.value;
            t_last = up.t_last;

            // oracle: decay, then reinforce, then cap, step by step
            long double decayed = ov * std::exp(-static_cast<long double>(p.lambda) *
                                                (static_cast<long double>(t) - ot));
            long double reinforced = decayed +
                                     (access ? static_cast<long double>(p.alpha) : 0.0L) +
                                     (contrib ? static_cast<long double>(p.beta) : 0.0L);
            ov = std::min(reinforced, static_cast<long double>(p.v_max));
            ot = static_cast<long double>(t);

            double rel = std::abs(v - static_cast<double>(ov)) /
                         std::max(1.0, std::abs(static_cast<double>(ov)));
            worst = std::max(worst, rel);
        }
    }

    // half-life, cap and ordering identities
    bool identities = true;
    {
        ValueParams p;
        p.alpha = 1.0;
        p.beta = 2.0;
        p.lambda = std::log(2.0) / 600.0;
        p.v_max = 100.0;
        auto half = updated_value(2.0, 0.0, UsageEvent{1, false, false, 600.0}, p);
        identities = identities && std::abs(half.value - 1.0) < 1e-12;
        auto cap = updated_value(99.5, 0.0, UsageEvent{1, true, true, 0.0}, p);
        identities = identities && cap.value == 100.0;
        auto same = updated_value(4.0, 100.0, UsageEvent{1, false, false, 100.0}, p);
        identities = identities && same.value == 4.0;
        DetRng r2(7);
        for (int i = 0; i < 2000; ++i) {
            double v2 = r2.next_double() * 50.0;
            double v1 = v2 + r2.next_double() * 50.0 + 1e-9;
            double dt = r2.next_double() * 5000.0;
            double lambda = 1e-4 + r2.next_double() * 0.05;
            identities = identities &&
                         decay_only(v1, 0.0, dt, lambda) > decay_only(v2, 0.0, dt, lambda);
        }
    }

    c.pass = worst <= 1e-12 && identities;
    c.detail = fmt("worst relative error %.2e; identities %s", worst,
                   identities ? "hold" : "violated");
    return c;
}

// --- criterion 7: lifecycle properties ---

CriterionResult check_lifecycle(const EngineConfig& base_cfg) {
    CriterionResult c{7, "lifecycle: no oscillation, one-step transitions, safe eviction, liveness",
                      false, ""};
    const LifecycleThresholds& th = base_cfg.thresholds;

    // in-band walks never transition
    DetRng rng(991);
    size_t in_band_transitions = 0;
    for (int walk = 0; walk < 1000; ++walk) {
        Tier tier = walk % 2 == 0 ? Tier::Hot : Tier::Warm;
        for (int step = 0; step < 50; ++step) {
            double v = th.theta_h_down + 1e-9 +
                       rng.next_double() * (th.theta_h_up - th.theta_h_down - 2e-9);
            Tier next = next_tier(tier, v, th);
            if (next != tier) ++in_band_transitions;
            tier = next;
        }
    }

    // mini run:usage churn with an observer validating every applied transition
    EngineConfig cfg = base_cfg;
    cfg.store.wal_path.clear();
    Runtime rt(cfg, PolicyKind::AMVL, 1e18, nullptr);
    bool one_step = true;
    bool safe_eviction = true;
    size_t evictions = 0;
    rt.lifecycle.set_transition_observer([&](const TierTransition& t) {
        if (t.cause == TransitionCause::Eviction) {
            ++evictions;
            safe_eviction = safe_eviction && t.from_tier == Tier::Cold &&
                            t.value_at_transition < cfg.thresholds.theta_e;
            return;
        }
        int delta = std::abs(static_cast<int>(t.to_tier) - static_cast<int>(t.from_tier));
        one_step = one_step && delta == 1;
    });

    std::vector<float> e1(cfg.retrieval.embedding_dim, 0.0f);
    e1[0] = 1.0f;
    const size_t n_items = 400;
    double t = 0.0;
    for (size_t i = 0; i < n_items; ++i) {
        rt.store.put("item", e1, 0.5, t);
        t += 0.25;
    }
    DetRng usage(437);
    for (int step = 0; step < 4000; ++step) {
        t += 0.5;
        rt.clock.advance_to(t);
        ItemId id = 1 + usage.next_below(n_items);
        if (rt.store.exists(id)) {
            bool contrib = usage.next_below(4) == 0;
            rt.lifecycle.apply_usage(UsageEvent{id, true, contrib, t});
        }
        rt.lifecycle.maybe_sweep();
    }
    bool partition_ok = rt.store.check_partition();

    // liveness: idle past the closed-form bound, then two full rotations
    double bound = std::log(cfg.value.v_max / cfg.thresholds.theta_e) / cfg.value.lambda;
    t += bound + 1.0;
    rt.clock.advance_to(t);
    size_t rotations = 2 * (n_items / cfg.lifecycle.sweep_batch + 1) + 2;
    for (size_t s = 0; s < rotations; ++s) rt.lifecycle.maintenance_sweep(t);
    bool all_evicted = rt.store.stored_count() == 0;

    // exact-threshold case: v == theta_e in Cold is not evicted (strict <)
    bool strict_ok;
    {
        Runtime rt2(cfg, PolicyKind::AMVL, 1e18, nullptr);
        ItemId id = rt2.store.put("edge", e1, 0.5, 0.0);
        rt2.store.update_item_atomic(id, UpdateDelta{cfg.thresholds.theta_e, Tier::Cold,
                                                     std::nullopt, std::nullopt});
        rt2.lifecycle.maintenance_sweep(0.0);
        strict_ok = rt2.store.exists(id);
    }

    c.pass = in_band_transitions == 0 && one_step && safe_eviction && partition_ok &&
             all_evicted && strict_ok;
    c.detail = fmt("in-band transitions=%zu one_step=%d safe_eviction=%d partition=%d "
                   "liveness=%d strict_theta_e=%d (%zu evictions observed)",
                   in_band_transitions, one_step ? 1 : 0, safe_eviction ? 1 : 0,
                   partition_ok ? 1 : 0, all_evicted ? 1 : 0, strict_ok ? 1 : 0, evictions);
    return c;
}

// --- criterion 8: vector engine vs full-sort brute force ---

CriterionResult check_vector_engine() {
    CriterionResult c{8, "vector engine equals full-sort oracle on 500 instances", false, ""};
    const uint32_t dim = 64;
    DetRng rng(5511);
    VectorEngine engine(dim);

    const size_t pool = 5000;
    std::vector<std::vector<float>> vectors(pool);
    for (size_t i = 0; i < pool; ++i) {
        if (i % 97 == 1) {
            vectors[i] = vectors[i - 1];  // exact duplicates exercise the tie-break
        } else {
            std::vector<double> v(dim);
            double norm2 = 0.0;
            for (auto& x : v) {
                x = rng.next_gaussian();
                norm2 += x * x;
            }
            double inv = 1.0 / std::sqrt(norm2);
            vectors[i].resize(dim);
            for (uint32_t d = 0; d < dim; ++d) {
                vectors[i][d] = static_cast<float>(v[d] * inv);
            }
        }
        engine.index_vector(i + 1, vectors[i]);
    }

    size_t mismatches = 0;
    for (int inst = 0; inst < 500; ++inst) {
        size_t allow_size = 1 + rng.next_below(pool);
        std::vector<ItemId> allow;
        allow.reserve(allow_size);
        for (size_t i = 0; i < allow_size; ++i) {
            allow.push_back(1 + rng.next_below(pool));
        }
        std::sort(allow.begin(), allow.end());
        allow.erase(std::unique(allow.begin(), allow.end()), allow.end());
        size_t k_out = 1 + rng.next_below(64);

        std::vector<float> q(dim);
        {
            std::vector<double> v(dim);
            double norm2 = 0.0;
            for (auto& x : v) {
                x = rng.next_gaussian();
                norm2 += x * x;
            }
            double inv = 1.0 / std::sqrt(norm2);
            for (uint32_t d = 0; d < dim; ++d) q[d] = static_cast<float>(v[d] * inv);
        }

        ScanResult got = engine.scan(q, allow, k_out);

        // oracle: score everything, full sort, truncate
        std::vector<ScanHit> expect;
        expect.reserve(allow.size());
        for (ItemId id : allow) {
            const auto& v = vectors[id - 1];
            double dot = 0.0;
            for (uint32_t d = 0; d < dim; ++d) {
                dot += static_cast<double>(q[d]) * v[d];
            }
            expect.push_back(ScanHit{id, dot});
        }
        std::sort(expect.begin(), expect.end(), [](const ScanHit& a, const ScanHit& b) {
            if (a.similarity != b.similarity) return a.similarity > b.similarity;
            return a.id < b.id;
        });
        if (expect.size() > k_out) expect.resize(k_out);

        bool equal = got.vectors_scanned == allow.size() && got.hits.size() == expect.size();
        for (size_t i = 0; equal && i < expect.size(); ++i) {
            equal = got.hits[i].id == expect[i].id &&
                    got.hits[i].similarity == expect[i].similarity;
        }
        if (!equal) ++mismatches;
    }
    c.pass = mismatches == 0;
    c.detail = fmt("%zu/500 mismatching instances", mismatches);
    return c;
}

// --- criterion 9: determinism ---

json stripped_lines(const std::string& path) {
    std::ifstream in(path);
    json out = json::array();
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        rec.erase("ts_wall_us");
        rec.erase("phase_durations_us");
        rec.erase("latency_us");
        out.push_back(std::move(rec));
    }
    return out;
}

CriterionResult check_determinism(const EngineConfig& cfg, const std::string& out_dir,
                                  const std::vector<RunReport>& reports,
                                  const std::vector<WorkloadEvent>& events) {
    CriterionResult c{9, "determinism: same-seed reruns and trace replay round-trip", false, ""};
    const RunReport* amvl = find_report(reports, "amvl");
    if (!amvl || reports.size() < 2) {
        c.detail = "requires a full multi-policy run";
        return c;
    }
    std::string scratch = out_dir + "/check_scratch";
    fs::create_directories(scratch);

    // rerun the whole protocol from the seed, workload generation included
    std::vector<WorkloadEvent> events2 = generate_workload(cfg.workload);
    std::vector<RunReport> reports2;
    for (const auto& r : reports) {
        PolicyKind kind = r.policy == "ttl" ? PolicyKind::TTL
                          : r.policy == "lru" ? PolicyKind::LRU
                                              : PolicyKind::AMVL;
        reports2.push_back(run_single_policy(cfg, kind, events2,
                                             scratch + "/" + r.policy + "_rerun.ndjson"));
    }
    json cmp1 = strip_wall_fields(comparison_to_json(compare(reports)));
    json cmp2 = strip_wall_fields(comparison_to_json(compare(reports2)));
    bool rerun_equal = cmp1 == cmp2;

    // trace export -> import -> replay must reproduce content fields exactly
    std::string trace_path = scratch + "/trace.ndjson";
    export_trace(events, trace_path);
    std::vector<WorkloadEvent> imported = import_trace(trace_path);
    run_single_policy(cfg, PolicyKind::AMVL, imported, scratch + "/amvl_replayed.ndjson");
    json original = stripped_lines(out_dir + "/amvl.ndjson");
    json replayed = stripped_lines(scratch + "/amvl_replayed.ndjson");
    bool replay_equal = original == replayed;

    c.pass = rerun_equal && replay_equal;
    c.detail = fmt("rerun comparison %s; replay telemetry %s",
                   rerun_equal ? "identical" : "differs",
                   replay_equal ? "identical" : "differs");
    return c;
}

CriterionResult check_isolation(const std::vector<RunReport>& reports) {
    CriterionResult c{10, "request-path isolation: zero migrations/evictions/sweeps in handlers",
                      false, ""};
    const RunReport* amvl = find_report(reports, "amvl");
    if (!amvl) {
        c.detail = "amvl run missing";
        return c;
    }
    uint64_t total = amvl->rp_tier_migrations + amvl->rp_evictions + amvl->rp_sweep_batches;
    c.pass = total == 0;
    c.detail = fmt("amvl run: migrations=%llu evictions=%llu sweep_batches=%llu",
                   static_cast<unsigned long long>(amvl->rp_tier_migrations),
                   static_cast<unsigned long long>(amvl->rp_evictions),
                   static_cast<unsigned long long>(amvl->rp_sweep_batches));
    return c;
}

// --- criterion 11: LRU vs reference doubly-linked-list simulation ---

class ReferenceLru {
public:
    explicit ReferenceLru(size_t capacity) : capacity_(capacity) {}

    void write(ItemId id) { list_.push_front(id); }

    std::vector<ItemId> candidates() const {
        std::vector<ItemId> out;
        size_t n = 0;
        for (auto it = list_.begin(); it != list_.end() && n < capacity_; ++it, ++n) {
            out.push_back(*it);
        }
        return out;
    }

    void feedback(const std::vector<ItemId>& working_set, const std::vector<ItemId>& selected) {
        std::vector<ItemId> rest;
        for (ItemId id : working_set) {
            if (std::find(selected.begin(), selected.end(), id) == selected.end()) {
                rest.push_back(id);
            }
        }
        for (ItemId id : working_set) list_.remove(id);
        // selected first (most recent), then the remainder in prior order
        for (auto it = rest.rbegin(); it != rest.rend(); ++it) list_.push_front(*it);
        for (auto it = selected.rbegin(); it != selected.rend(); ++it) list_.push_front(*it);
    }

private:
    size_t capacity_;
    std::list<ItemId> list_;
};

CriterionResult check_lru_reference(const EngineConfig& base_cfg) {
    CriterionResult c{11, "LRU candidate sets equal the reference simulation on a 10k-op trace",
                      false, ""};
    EngineConfig cfg = base_cfg;
    cfg.store.wal_path.clear();
    Runtime rt(cfg, PolicyKind::LRU, 1e18, nullptr);
    ReferenceLru ref(cfg.policy.lru_capacity);

    std::vector<float> e1(cfg.retrieval.embedding_dim, 0.0f);
    e1[0] = 1.0f;
    DetRng rng(80217);
    double t = 0.0;
    size_t mismatches = 0;
    size_t compared = 0;
    for (int op = 0; op < 10000; ++op) {
        t += 0.5;
        rt.clock.advance_to(t);
        if (rt.store.total_puts() == 0 || rng.next_below(5) < 3) {
            ItemId id = rt.store.put("op", e1, 0.5, t);
            ref.write(id);
        } else {
            CandidateSet got = rt.policy->build_candidates(t, op);
            std::vector<ItemId> expect = ref.candidates();
            ++compared;
            if (got.ids != expect) {
                ++mismatches;
                continue;
            }
            // random selected subset, in "rank" order
            std::vector<ItemId> selected;
            if (!got.ids.empty()) {
                size_t take = rng.next_below(std::min<size_t>(got.ids.size(), 48) + 1);
                std::vector<ItemId> shuffled = got.ids;
                for (size_t i = 0; i + 1 < shuffled.size() && i < take; ++i) {
                    size_t j = i + rng.next_below(shuffled.size() - i);
                    std::swap(shuffled[i], shuffled[j]);
                }
                selected.assign(shuffled.begin(), shuffled.begin() + take);
            }
            rt.policy->on_feedback(got, selected, t);
            ref.feedback(got.ids, selected);
        }
    }
    c.pass = compared > 0 && mismatches == 0;
    c.detail = fmt("%zu candidate sets compared, %zu mismatches", compared, mismatches);
    return c;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const EngineConfig& cfg, const std::string& out_dir,
                                            const std::vector<RunReport>& reports,
                                            const std::vector<WorkloadEvent>& events) {
    std::vector<CriterionResult> results;
    results.push_back(check_eligibility_bound(reports));
    results.push_back(check_footprint(reports));
    results.push_back(check_quality(reports));
    results.push_back(check_cap(reports, cfg));
    results.push_back(check_tail(reports));
    results.push_back(check_value_model());
    results.push_back(check_lifecycle(cfg));
    results.push_back(check_vector_engine());
    results.push_back(check_determinism(cfg, out_dir, reports, events));
    results.push_back(check_isolation(reports));
    results.push_back(check_lru_reference(cfg));
    return results;
}

}  // namespace amvl
