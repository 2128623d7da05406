#pragma once

#include <memory>
#include <string>
#include <vector>

#include "amvl/analysis.hpp"
#include "amvl/clock.hpp"
#include "amvl/config.hpp"
#include "amvl/pipeline.hpp"
#include "amvl/policies.hpp"
#include "amvl/workload.hpp"

namespace amvl {

// One policy run's moving parts, wired together with a fresh (cleared) store.
struct Runtime {
    Runtime(const EngineConfig& cfg, PolicyKind kind, double resolved_ttl_window,
            TelemetrySink* sink, ClockMode clock_mode = ClockMode::Virtual);

    EngineConfig cfg;
    Clock clock;
    Store store;
    VectorEngine engine;
    LifecycleManager lifecycle;
    Embedder embedder;
    std::unique_ptr<EligibilityPolicy> policy;
    Pipeline pipeline;
};

struct RunOptions {
    EngineConfig cfg;
    std::string out_dir;
    std::string scale = "desk";
    std::vector<PolicyKind> policies = {PolicyKind::TTL, PolicyKind::LRU, PolicyKind::AMVL};
    bool check = false;
    std::string export_trace_path;  // empty = no export
};

// Replays one policy over a prepared event stream; telemetry goes to
// telemetry_path. Returns the analyzed report.
RunReport run_single_policy(const EngineConfig& cfg, PolicyKind kind,
                            const std::vector<WorkloadEvent>& events,
                            const std::string& telemetry_path);

// The three-run protocol: for each policy, a cleared store replays the
// identical seeded trace; telemetry, per-run reports, comparison tables and
// CSV series land in out_dir. Returns 0, or 1 on run failure, or 2 when
// --check is set and an acceptance criterion fails.
int run_benchmark(const RunOptions& opts);

// Single-policy replay of an exported trace file.
int replay_trace_file(const EngineConfig& cfg, const std::string& trace_path, PolicyKind kind,
                      const std::string& out_dir);

// TTL window: configured value, or the whole run duration when 0.
double resolve_ttl_window(const EngineConfig& cfg);

}  // namespace amvl
