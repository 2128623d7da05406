#include "amvl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "amvl/errors.hpp"

namespace amvl {

using nlohmann::json;

double percentile(std::vector<double> samples, double p) {
    if (samples.empty()) throw Error(ErrorCode::EmptySamples, "percentile of empty series");
    std::sort(samples.begin(), samples.end());
    double n = static_cast<double>(samples.size());
    auto rank = static_cast<size_t>(std::ceil(p / 100.0 * n));
    rank = std::clamp<size_t>(rank, 1, samples.size());
    return samples[rank - 1];
}

namespace {

LatencyStats latency_stats(const std::vector<double>& us) {
    LatencyStats s;
    if (us.empty()) return s;
    s.p50_ms = percentile(us, 50.0) / 1000.0;
    s.p95_ms = percentile(us, 95.0) / 1000.0;
    s.p99_ms = percentile(us, 99.0) / 1000.0;
    return s;
}

double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

double get_num(const json& rec, const char* field, size_t line_no) {
    auto it = rec.find(field);
    if (it == rec.end() || !it->is_number()) {
        throw Error(ErrorCode::SchemaError,
                    std::string(field) + " missing at line " + std::to_string(line_no));
    }
    return it->get<double>();
}

}  // namespace

RunReport analyze(const std::string& telemetry_path) {
    std::ifstream in(telemetry_path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open telemetry " + telemetry_path);

    RunReport r;
    std::vector<double> latency_all, latency_write, latency_recall, latency_ask;
    std::vector<double> candidate_sizes, scanned, scanned_ratio, tokens, chunks, memrefs;
    std::vector<double> request_wall_us;
    std::vector<double> per_request_top1, per_request_weighted;
    uint64_t hv_hit_requests = 0, retrieval_requests = 0;
    uint64_t injected_total = 0, injected_high = 0;
    double injected_label_sum = 0.0;
    uint64_t ok_count = 0;

    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception&) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no));
        }
        std::string type = rec.value("type", "");
        if (type == "run_header") {
            r.policy = rec.value("policy", "");
            r.seed = rec.value("seed", 0ull);
            r.prompt_cap_n = rec.value("prompt_cap_n", 0u);
            r.warm_budget_k = rec.value("warm_budget_k", 0u);
            r.high_value_threshold = rec.value("high_value_threshold", 0.8);
            continue;
        }
        if (type == "run_summary") {
            r.rp_tier_migrations = rec.value("rp_tier_migrations", 0ull);
            r.rp_evictions = rec.value("rp_evictions", 0ull);
            r.rp_sweep_batches = rec.value("rp_sweep_batches", 0ull);
            r.final_stored = rec.value("final_stored", 0ull);
            continue;
        }
        if (type == "lifecycle_snapshot") {
            r.stored_items_timeseries.push_back(
                TimePoint{get_num(rec, "t_virtual", line_no), get_num(rec, "stored", line_no)});
            continue;
        }
        if (type != "request") {
            ++r.orphan_lines;
            continue;
        }

        std::string kind = rec.value("kind", "");
        if (kind == "health") {
            ++r.health_excluded;
            continue;
        }
        ++r.requests_total;
        if (rec.value("ok", true)) ++ok_count;
        double latency = get_num(rec, "latency_us", line_no);
        latency_all.push_back(latency);
        request_wall_us.push_back(get_num(rec, "ts_wall_us", line_no));

        if (kind == "write") {
            ++r.writes;
            latency_write.push_back(latency);
            continue;
        }
        if (kind != "recall" && kind != "ask") {
            throw Error(ErrorCode::SchemaError, "kind at line " + std::to_string(line_no));
        }
        bool is_ask = kind == "ask";
        (is_ask ? r.asks : r.recalls)++;
        (is_ask ? latency_ask : latency_recall).push_back(latency);
        ++retrieval_requests;

        double cand = get_num(rec, "candidate_size", line_no);
        double scan = get_num(rec, "vectors_scanned", line_no);
        double injected = get_num(rec, "injected_count", line_no);
        candidate_sizes.push_back(cand);
        scanned.push_back(scan);
        if (cand > 0) scanned_ratio.push_back(scan / cand);
        chunks.push_back(injected);
        if (is_ask) {
            memrefs.push_back(injected);
            tokens.push_back(get_num(rec, "token_count", line_no));
        }
        if (r.prompt_cap_n > 0 && injected > r.prompt_cap_n) ++r.cap_violations;
        if (r.prompt_cap_n > 0 &&
            injected != std::min<double>(r.prompt_cap_n, scan)) {
            ++r.injection_mismatches;
        }
        if (r.policy == "amvl") {
            double hot = get_num(rec, "hot_count", line_no);
            double warm = get_num(rec, "warm_count", line_no);
            if (cand > hot + r.warm_budget_k || warm > r.warm_budget_k || hot + warm != cand) {
                ++r.eligibility_bound_violations;
            }
        }

        const auto& labels = rec.at("injected_label_values");
        const auto& sims = rec.at("injected_sims");
        if (!labels.is_array() || !sims.is_array() || labels.size() != sims.size()) {
            throw Error(ErrorCode::SchemaError,
                        "injected arrays at line " + std::to_string(line_no));
        }
        bool hv_hit = false;
        double weighted = 0.0;
        for (size_t i = 0; i < labels.size(); ++i) {
            double label = labels[i].get<double>();
            double sim = sims[i].get<double>();
            ++injected_total;
            injected_label_sum += label;
            if (label >= r.high_value_threshold) {
                ++injected_high;
                hv_hit = true;
            }
            weighted += sim * label;
        }
        if (hv_hit) ++hv_hit_requests;
        if (!labels.empty()) {
            per_request_top1.push_back(labels[0].get<double>());
        }
        if (r.prompt_cap_n > 0) {
            per_request_weighted.push_back(weighted / static_cast<double>(r.prompt_cap_n));
        }
    }

    if (r.requests_total > 0) {
        r.success_rate_pct = 100.0 * static_cast<double>(ok_count) /
                             static_cast<double>(r.requests_total);
    }
    if (!candidate_sizes.empty()) {
        r.retrieval_set_p95 = percentile(candidate_sizes, 95.0);
        r.vectors_scanned_p95 = percentile(scanned, 95.0);
        r.vectors_scanned_p99 = percentile(scanned, 99.0);
    }
    r.scanned_per_retrieval_mean = mean(scanned_ratio);
    r.tokens_mean = mean(tokens);
    if (!tokens.empty()) r.tokens_p95 = percentile(tokens, 95.0);
    if (!chunks.empty()) r.chunks_p95 = percentile(chunks, 95.0);
    if (!memrefs.empty()) r.memrefs_p95 = percentile(memrefs, 95.0);
    if (injected_total > 0) {
        r.retrieved_value_mean = injected_label_sum / static_cast<double>(injected_total);
        r.high_value_share_pct =
            100.0 * static_cast<double>(injected_high) / static_cast<double>(injected_total);
    }
    r.top1_value_mean = mean(per_request_top1);
    r.value_weighted_score_mean = mean(per_request_weighted);
    if (retrieval_requests > 0) {
        r.high_value_hit_rate_pct =
            100.0 * static_cast<double>(hv_hit_requests) / static_cast<double>(retrieval_requests);
    }

    // wall-derived
    r.latency_overall = latency_stats(latency_all);
    r.latency_write = latency_stats(latency_write);
    r.latency_recall = latency_stats(latency_recall);
    r.latency_ask = latency_stats(latency_ask);
    if (!latency_all.empty()) {
        uint64_t over1 = 0, over2 = 0;
        for (double us : latency_all) {
            if (us > 1e6) ++over1;
            if (us > 2e6) ++over2;
        }
        r.pct_over_1s = 100.0 * static_cast<double>(over1) / static_cast<double>(latency_all.size());
        r.pct_over_2s = 100.0 * static_cast<double>(over2) / static_cast<double>(latency_all.size());
    }
    if (!request_wall_us.empty()) {
        double first = *std::min_element(request_wall_us.begin(), request_wall_us.end());
        double last = *std::max_element(request_wall_us.begin(), request_wall_us.end());
        double span_s = (last - first) / 1e6;
        r.throughput_rps = span_s > 0.0
                               ? static_cast<double>(r.requests_total) / span_s
                               : static_cast<double>(r.requests_total);
        // 10 s wall buckets
        size_t buckets = static_cast<size_t>(span_s / 10.0) + 1;
        std::vector<double> counts(buckets, 0.0);
        for (double ts : request_wall_us) {
            size_t b = static_cast<size_t>((ts - first) / 1e7);
            if (b >= buckets) b = buckets - 1;
            counts[b] += 1.0;
        }
        for (size_t b = 0; b < buckets; ++b) {
            r.throughput_timeseries.push_back(
                TimePoint{static_cast<double>(b) * 10.0, counts[b] / 10.0});
        }
    }
    if (!latency_all.empty()) {
        std::vector<double> sorted = latency_all;
        std::sort(sorted.begin(), sorted.end());
        size_t n = sorted.size();
        size_t stride = std::max<size_t>(1, n / 4000);
        for (size_t i = 0; i < n; i += stride) {
            double above = static_cast<double>(n - i - 1) / static_cast<double>(n);
            r.ccdf.push_back(TimePoint{sorted[i] / 1000.0, above});
        }
    }
    return r;
}

json report_to_json(const RunReport& r) {
    json det{{"policy", r.policy},
             {"seed", r.seed},
             {"prompt_cap_n", r.prompt_cap_n},
             {"warm_budget_k", r.warm_budget_k},
             {"high_value_threshold", r.high_value_threshold},
             {"requests_total", r.requests_total},
             {"writes", r.writes},
             {"recalls", r.recalls},
             {"asks", r.asks},
             {"success_rate_pct", r.success_rate_pct},
             {"retrieval_set_p95", r.retrieval_set_p95},
             {"vectors_scanned_p95", r.vectors_scanned_p95},
             {"vectors_scanned_p99", r.vectors_scanned_p99},
             {"scanned_per_retrieval_mean", r.scanned_per_retrieval_mean},
             {"tokens_mean", r.tokens_mean},
             {"tokens_p95", r.tokens_p95},
             {"chunks_p95", r.chunks_p95},
             {"memrefs_p95", r.memrefs_p95},
             {"retrieved_value_mean", r.retrieved_value_mean},
             {"top1_value_mean", r.top1_value_mean},
             {"value_weighted_score_mean", r.value_weighted_score_mean},
             {"high_value_hit_rate_pct", r.high_value_hit_rate_pct},
             {"high_value_share_pct", r.high_value_share_pct},
             {"eligibility_bound_violations", r.eligibility_bound_violations},
             {"cap_violations", r.cap_violations},
             {"injection_mismatches", r.injection_mismatches},
             {"orphan_lines", r.orphan_lines},
             {"health_excluded", r.health_excluded},
             {"rp_tier_migrations", r.rp_tier_migrations},
             {"rp_evictions", r.rp_evictions},
             {"rp_sweep_batches", r.rp_sweep_batches},
             {"final_stored", r.final_stored}};
    json stored = json::array();
    for (const auto& p : r.stored_items_timeseries) stored.push_back({p.t, p.value});
    det["stored_items_timeseries"] = stored;

    auto lat = [](const LatencyStats& s) {
        return json{{"p50_ms", s.p50_ms}, {"p95_ms", s.p95_ms}, {"p99_ms", s.p99_ms}};
    };
    json wall{{"throughput_rps", r.throughput_rps},
              {"latency_overall", lat(r.latency_overall)},
              {"latency_write", lat(r.latency_write)},
              {"latency_recall", lat(r.latency_recall)},
              {"latency_ask", lat(r.latency_ask)},
              {"pct_over_1s", r.pct_over_1s},
              {"pct_over_2s", r.pct_over_2s}};
    return json{{"deterministic", det}, {"wall", wall}};
}

std::vector<ComparisonTable> compare(const std::vector<RunReport>& reports) {
    if (reports.size() < 2) {
        throw Error(ErrorCode::MissingMetric, "compare needs at least two reports");
    }
    auto row = [&](const std::string& name, const std::string& direction, bool wall,
                   auto accessor) {
        MetricRow r;
        r.name = name;
        r.direction = direction;
        r.wall = wall;
        for (const auto& rep : reports) r.values[rep.policy] = accessor(rep);
        if (r.values.count("amvl") && r.values.count("ttl") && r.values["ttl"] != 0.0) {
            r.amvl_over_ttl = r.values["amvl"] / r.values["ttl"];
        }
        return r;
    };

    std::vector<ComparisonTable> tables;
    {
        ComparisonTable t;
        t.title = "Reliability and end-to-end performance";
        t.rows.push_back(row("Success rate (%)", "higher", false,
                             [](const RunReport& r) { return r.success_rate_pct; }));
        t.rows.push_back(row("Throughput (req/s)", "higher", true,
                             [](const RunReport& r) { return r.throughput_rps; }));
        t.rows.push_back(row("Latency p50 (ms)", "lower", true,
                             [](const RunReport& r) { return r.latency_overall.p50_ms; }));
        t.rows.push_back(row("Latency p95 (ms)", "lower", true,
                             [](const RunReport& r) { return r.latency_overall.p95_ms; }));
        t.rows.push_back(row("Latency p99 (ms)", "lower", true,
                             [](const RunReport& r) { return r.latency_overall.p99_ms; }));
        t.rows.push_back(row("Latency > 1s (%)", "lower", true,
                             [](const RunReport& r) { return r.pct_over_1s; }));
        t.rows.push_back(row("Latency > 2s (%)", "lower", true,
                             [](const RunReport& r) { return r.pct_over_2s; }));
        tables.push_back(std::move(t));
    }
    {
        ComparisonTable t;
        t.title = "Endpoint latency breakdown at p95";
        t.rows.push_back(row("Write latency p95 (ms)", "lower", true,
                             [](const RunReport& r) { return r.latency_write.p95_ms; }));
        t.rows.push_back(row("Recall latency p95 (ms)", "lower", true,
                             [](const RunReport& r) { return r.latency_recall.p95_ms; }));
        t.rows.push_back(row("Ask latency p95 (ms)", "lower", true,
                             [](const RunReport& r) { return r.latency_ask.p95_ms; }));
        tables.push_back(std::move(t));
    }
    {
        ComparisonTable t;
        t.title = "Retrieval efficiency";
        t.rows.push_back(row("Retrieval set p95 (R)", "lower", false,
                             [](const RunReport& r) { return r.retrieval_set_p95; }));
        t.rows.push_back(row("Vectors scanned p95", "lower", false,
                             [](const RunReport& r) { return r.vectors_scanned_p95; }));
        t.rows.push_back(row("Scanned per retrieval mean", "lower", false,
                             [](const RunReport& r) { return r.scanned_per_retrieval_mean; }));
        tables.push_back(std::move(t));
    }
    {
        ComparisonTable t;
        t.title = "Prompt and token cost";
        t.rows.push_back(row("Tokens/request mean", "lower", false,
                             [](const RunReport& r) { return r.tokens_mean; }));
        t.rows.push_back(row("Tokens/request p95", "lower", false,
                             [](const RunReport& r) { return r.tokens_p95; }));
        t.rows.push_back(row("Chunks/request p95", "lower", false,
                             [](const RunReport& r) { return r.chunks_p95; }));
        t.rows.push_back(row("Memory refs/request p95", "lower", false,
                             [](const RunReport& r) { return r.memrefs_p95; }));
        tables.push_back(std::move(t));
    }
    {
        ComparisonTable t;
        t.title = "Retrieval quality and value utility";
        t.rows.push_back(row("Retrieved value mean", "higher", false,
                             [](const RunReport& r) { return r.retrieved_value_mean; }));
        t.rows.push_back(row("Top-1 retrieved value mean", "higher", false,
                             [](const RunReport& r) { return r.top1_value_mean; }));
        t.rows.push_back(row("Value-weighted retrieval score mean", "higher", false,
                             [](const RunReport& r) { return r.value_weighted_score_mean; }));
        t.rows.push_back(row("High-value hit rate (%)", "higher", false,
                             [](const RunReport& r) { return r.high_value_hit_rate_pct; }));
        t.rows.push_back(row("High-value retrieved share (%)", "higher", false,
                             [](const RunReport& r) { return r.high_value_share_pct; }));
        tables.push_back(std::move(t));
    }
    return tables;
}

json comparison_to_json(const std::vector<ComparisonTable>& tables) {
    json out = json::array();
    for (const auto& t : tables) {
        json rows = json::array();
        for (const auto& r : t.rows) {
            json vals(r.values);
            json row{{"metric", r.name},
                     {"direction", r.direction},
                     {"wall", r.wall},
                     {"values", vals}};
            if (r.amvl_over_ttl) row["amvl_over_ttl"] = *r.amvl_over_ttl;
            rows.push_back(std::move(row));
        }
        out.push_back(json{{"title", t.title}, {"rows", rows}});
    }
    return out;
}

std::string render_tables(const std::vector<ComparisonTable>& tables) {
    std::ostringstream out;
    for (const auto& t : tables) {
        out << t.title << "\n";
        std::vector<std::string> policies;
        if (!t.rows.empty()) {
            for (const auto& [policy, _] : t.rows.front().values) policies.push_back(policy);
        }
        // canonical column order
        std::vector<std::string> ordered;
        for (const char* want : {"ttl", "lru", "amvl"}) {
            if (std::find(policies.begin(), policies.end(), want) != policies.end()) {
                ordered.push_back(want);
            }
        }
        for (const auto& p : policies) {
            if (std::find(ordered.begin(), ordered.end(), p) == ordered.end()) {
                ordered.push_back(p);
            }
        }
        char buf[64];
        std::snprintf(buf, sizeof(buf), "  %-38s %-9s", "Metric", "Direction");
        out << buf;
        for (const auto& p : ordered) {
            std::snprintf(buf, sizeof(buf), " %12s", p.c_str());
            out << buf;
        }
        out << "  AMVL/TTL\n";
        for (const auto& r : t.rows) {
            std::snprintf(buf, sizeof(buf), "  %-38s %-9s", r.name.c_str(), r.direction.c_str());
            out << buf;
            for (const auto& p : ordered) {
                auto it = r.values.find(p);
                if (it == r.values.end()) {
                    std::snprintf(buf, sizeof(buf), " %12s", "-");
                } else {
                    std::snprintf(buf, sizeof(buf), " %12.3f", it->second);
                }
                out << buf;
            }
            if (r.amvl_over_ttl) {
                std::snprintf(buf, sizeof(buf), " %9.3f", *r.amvl_over_ttl);
                out << buf;
            }
            out << "\n";
        }
        out << "\n";
    }
    return out.str();
}

json strip_wall_fields(const json& comparison) {
    json out = json::array();
    for (const auto& table : comparison) {
        json rows = json::array();
        for (const auto& row : table.at("rows")) {
            if (row.value("wall", false)) continue;
            rows.push_back(row);
        }
        out.push_back(json{{"title", table.at("title")}, {"rows", rows}});
    }
    return out;
}

void write_csv_series(const std::string& path, const std::string& x_name,
                      const std::string& y_name, const std::vector<TimePoint>& points) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << x_name << "," << y_name << "\n";
    for (const auto& p : points) {
        out << p.t << "," << p.value << "\n";
    }
}

}  // namespace amvl
