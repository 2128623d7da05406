#include "amvl/harness.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "amvl/acceptance.hpp"

namespace amvl {

namespace fs = std::filesystem;
using nlohmann::json;

double resolve_ttl_window(const EngineConfig& cfg) {
    if (cfg.policy.ttl_window > 0.0) return cfg.policy.ttl_window;
    // whole run duration: nothing expires during the benchmark
    return workload_duration(cfg.workload) + cfg.workload.virtual_tick;
}

Runtime::Runtime(const EngineConfig& config, PolicyKind kind, double resolved_ttl_window,
                 TelemetrySink* sink, ClockMode clock_mode)
    : cfg(config),
      clock(clock_mode),
      store(config.store, config.retrieval.embedding_dim, kind, config.value, config.thresholds),
      engine(config.retrieval.embedding_dim),
      lifecycle(store, &engine, config.value, config.thresholds, config.lifecycle, clock, sink,
                kind == PolicyKind::TTL ? resolved_ttl_window : 0.0),
      embedder(config.retrieval.embedding_dim, config.pipeline.embed_seed),
      policy(make_policy(kind, store, &engine, lifecycle, config.retrieval, config.policy,
                         config.workload.seed, resolved_ttl_window)),
      pipeline(store, engine, lifecycle, *policy, embedder, config.retrieval, config.pipeline,
               clock, sink) {}

namespace {

void write_run_header(TelemetrySink& sink, const EngineConfig& cfg, PolicyKind kind,
                      double ttl_window) {
    json header{{"type", "run_header"},
                {"policy", policy_name(kind)},
                {"seed", cfg.workload.seed},
                {"prompt_cap_n", cfg.retrieval.prompt_cap_n},
                {"warm_budget_k", cfg.retrieval.warm_budget_k},
                {"high_value_threshold", cfg.workload.high_value_threshold},
                {"lru_capacity", cfg.policy.lru_capacity},
                {"ttl_window", ttl_window},
                {"embedding_dim", cfg.retrieval.embedding_dim}};
    sink.write_line(header.dump());
}

void write_run_summary(TelemetrySink& sink, const Runtime& rt) {
    RequestPathViolations v = rt.store.request_path_violations();
    StoreStats s = rt.store.stats();
    json summary{{"type", "run_summary"},
                 {"rp_tier_migrations", v.tier_migrations},
                 {"rp_evictions", v.evictions},
                 {"rp_sweep_batches", v.sweep_batches},
                 {"final_stored", s.stored},
                 {"final_hot", s.hot},
                 {"final_warm", s.warm},
                 {"final_cold", s.cold},
                 {"evictions_total", s.evictions},
                 {"tier_migrations_total", s.tier_migrations},
                 {"transition_queue_dropped", rt.lifecycle.queue_dropped()}};
    sink.write_line(summary.dump());
}

}  // namespace

RunReport run_single_policy(const EngineConfig& cfg, PolicyKind kind,
                            const std::vector<WorkloadEvent>& events,
                            const std::string& telemetry_path) {
    // window spans whatever trace is actually replayed (run or replay mode)
    double ttl_window = cfg.policy.ttl_window > 0.0
                            ? cfg.policy.ttl_window
                            : (events.empty() ? cfg.workload.virtual_tick
                                              : events.back().t_virtual +
                                                    cfg.workload.virtual_tick);
    TelemetrySink sink(telemetry_path);
    Runtime rt(cfg, kind, ttl_window, &sink);
    write_run_header(sink, cfg, kind, ttl_window);

    if (rt.store.stored_count() != 0) {
        throw Error(ErrorCode::InvalidArgument, "store not cleared before run");
    }

    const std::string& ns = cfg.workload.namespace_tag;
    for (const auto& ev : events) {
        rt.clock.advance_to(ev.t_virtual);
        switch (ev.kind) {
            case RequestKind::Write:
                rt.pipeline.write(ev.content, ev.label, ev.t_virtual, ev.index, ns);
                break;
            case RequestKind::Recall: {
                AskRequest req{ev.query_text, ns, ev.t_virtual, ev.index, RequestKind::Recall};
                rt.pipeline.recall(req);
                break;
            }
            case RequestKind::Ask: {
                AskRequest req{ev.query_text, ns, ev.t_virtual, ev.index, RequestKind::Ask};
                rt.pipeline.ask(req);
                break;
            }
        }
        // maintenance deadlines fire between requests, never inside them
        rt.lifecycle.maybe_sweep();
    }

    write_run_summary(sink, rt);
    sink.flush();
    sink.close();
    return analyze(telemetry_path);
}

int run_benchmark(const RunOptions& opts) {
    try {
        validate_engine_config(opts.cfg);
        fs::create_directories(opts.out_dir);

        // record every configuration value driving the run
        {
            json run_config{{"scale", opts.scale},
                            {"config_text", serialize_config(opts.cfg)},
                            {"policies", json::array()}};
            for (PolicyKind p : opts.policies) {
                run_config["policies"].push_back(policy_name(p));
            }
            run_config["resolved_ttl_window"] = resolve_ttl_window(opts.cfg);
            std::ofstream out(opts.out_dir + "/run_config.json", std::ios::trunc);
            out << run_config.dump(2) << "\n";
        }

        std::vector<WorkloadEvent> events = generate_workload(opts.cfg.workload);
        if (!opts.export_trace_path.empty()) {
            export_trace(events, opts.export_trace_path);
        }

        std::vector<RunReport> reports;
        for (PolicyKind kind : opts.policies) {
            std::string telemetry = opts.out_dir + "/" + policy_name(kind) + ".ndjson";
            std::cout << "[run] policy=" << policy_name(kind) << " events=" << events.size()
                      << " -> " << telemetry << std::endl;
            RunReport report = run_single_policy(opts.cfg, kind, events, telemetry);
            {
                std::ofstream out(opts.out_dir + "/" + policy_name(kind) + "_report.json",
                                  std::ios::trunc);
                out << report_to_json(report).dump(2) << "\n";
            }
            write_csv_series(opts.out_dir + "/" + policy_name(kind) + "_ccdf.csv", "latency_ms",
                             "ccdf", report.ccdf);
            write_csv_series(opts.out_dir + "/" + policy_name(kind) + "_throughput.csv",
                             "wall_bucket_s", "rps", report.throughput_timeseries);
            write_csv_series(opts.out_dir + "/" + policy_name(kind) + "_stored.csv", "t_virtual",
                             "stored_items", report.stored_items_timeseries);
            reports.push_back(std::move(report));
        }

        if (reports.size() >= 2) {
            auto tables = compare(reports);
            json comparison = comparison_to_json(tables);
            {
                std::ofstream out(opts.out_dir + "/comparison.json", std::ios::trunc);
                out << comparison.dump(2) << "\n";
            }
            std::string text = render_tables(tables);
            {
                std::ofstream out(opts.out_dir + "/tables.txt", std::ios::trunc);
                out << text;
            }
            std::cout << text;
        }

        if (opts.check) {
            if (opts.cfg.harness.workers > 1) {
                std::cerr << "--check requires workers=1 (deterministic replay)" << std::endl;
                return 2;
            }
            auto results = run_acceptance(opts.cfg, opts.out_dir, reports, events);
            bool all_pass = true;
            for (const auto& r : results) {
                std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << "criterion " << r.number << ": "
                          << r.name;
                if (!r.detail.empty()) std::cout << " — " << r.detail;
                std::cout << std::endl;
                all_pass = all_pass && r.pass;
            }
            if (!all_pass) return 2;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << std::endl;
        return 1;
    }
}

int replay_trace_file(const EngineConfig& cfg, const std::string& trace_path, PolicyKind kind,
                      const std::string& out_dir) {
    try {
        validate_engine_config(cfg);
        fs::create_directories(out_dir);
        std::vector<WorkloadEvent> events = import_trace(trace_path);
        std::string telemetry = out_dir + "/" + policy_name(kind) + ".ndjson";
        RunReport report = run_single_policy(cfg, kind, events, telemetry);
        std::ofstream out(out_dir + "/" + policy_name(kind) + "_report.json", std::ios::trunc);
        out << report_to_json(report).dump(2) << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "replay failed: " << e.what() << std::endl;
        return 1;
    }
}

}  // namespace amvl
