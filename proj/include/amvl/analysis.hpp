#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amvl/types.hpp"

namespace amvl {

// Nearest-rank percentile: sorted ascending, 1-based index ceil(p/100 * N),
// clamped to [1, N]. Throws EmptySamples when samples is empty.
double percentile(std::vector<double> samples, double p);

struct LatencyStats {
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double p99_ms = 0.0;
};

struct TimePoint {
    double t = 0.0;
    double value = 0.0;
};

// Everything the offline analyzer computes from one policy run's NDJSON log.
// Fields derived from wall-clock time live under the wall section of the
// JSON form and are excluded from determinism comparisons.
struct RunReport {
    std::string policy;
    uint64_t seed = 0;
    uint32_t prompt_cap_n = 0;
    uint32_t warm_budget_k = 0;
    double high_value_threshold = 0.8;

    // deterministic
    uint64_t requests_total = 0;
    uint64_t writes = 0;
    uint64_t recalls = 0;
    uint64_t asks = 0;
    double success_rate_pct = 0.0;
    double retrieval_set_p95 = 0.0;
    double vectors_scanned_p95 = 0.0;
    double vectors_scanned_p99 = 0.0;
    double scanned_per_retrieval_mean = 0.0;
    double tokens_mean = 0.0;
    double tokens_p95 = 0.0;
    double chunks_p95 = 0.0;
    double memrefs_p95 = 0.0;
    double retrieved_value_mean = 0.0;
    double top1_value_mean = 0.0;
    double value_weighted_score_mean = 0.0;
    double high_value_hit_rate_pct = 0.0;
    double high_value_share_pct = 0.0;
    uint64_t eligibility_bound_violations = 0;  // AMV-L: candidate_size > hot + k
    uint64_t cap_violations = 0;                // injected_count > n
    uint64_t injection_mismatches = 0;          // injected_count != min(n, scanned)
    uint64_t orphan_lines = 0;
    uint64_t health_excluded = 0;
    uint64_t rp_tier_migrations = 0;
    uint64_t rp_evictions = 0;
    uint64_t rp_sweep_batches = 0;
    uint64_t final_stored = 0;
    std::vector<TimePoint> stored_items_timeseries;  // virtual time

    // wall-clock derived
    double throughput_rps = 0.0;
    LatencyStats latency_overall;
    LatencyStats latency_write;
    LatencyStats latency_recall;
    LatencyStats latency_ask;
    double pct_over_1s = 0.0;
    double pct_over_2s = 0.0;
    std::vector<TimePoint> throughput_timeseries;  // 10 s wall buckets
    std::vector<TimePoint> ccdf;                   // (latency ms, P(latency > x))
};

// Pure function of the log file. Drops kind == "health" records.
RunReport analyze(const std::string& telemetry_path);

nlohmann::json report_to_json(const RunReport& r);

struct MetricRow {
    std::string name;
    std::string direction;  // "higher" | "lower"
    bool wall = false;
    std::map<std::string, double> values;  // policy -> value
    std::optional<double> amvl_over_ttl;
};

struct ComparisonTable {
    std::string title;
    std::vector<MetricRow> rows;
};

// The five comparison tables; requires at least two reports.
std::vector<ComparisonTable> compare(const std::vector<RunReport>& reports);

nlohmann::json comparison_to_json(const std::vector<ComparisonTable>& tables);
std::string render_tables(const std::vector<ComparisonTable>& tables);

// Removes every wall-clock-derived field; what remains must be identical
// across same-seed runs.
nlohmann::json strip_wall_fields(const nlohmann::json& comparison);

void write_csv_series(const std::string& path, const std::string& x_name,
                      const std::string& y_name, const std::vector<TimePoint>& points);

}  // namespace amvl
