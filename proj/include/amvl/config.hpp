#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amvl/errors.hpp"
#include "amvl/types.hpp"

namespace amvl {

// Value model parameters.
struct ValueParams {
    double alpha = 0.02;              // access reward
    double beta = 2.0;                // contribution reward
    double lambda = 0.0099021025794;  // ln(2)/70: 70 s virtual half-life
    double v_max = 100.0;
    double v_init = 5.0;  // = theta_h_up: new items enter Hot

    bool operator==(const ValueParams&) const = default;
};

// Hysteresis thresholds, theta_h_up > theta_h_down > theta_w_up > theta_w_down > theta_e >= 0.
struct LifecycleThresholds {
    double theta_h_up = 5.0;
    double theta_h_down = 3.0;
    double theta_w_up = 1.0;
    double theta_w_down = 0.5;
    double theta_e = 0.1;

    bool operator==(const LifecycleThresholds&) const = default;
};

enum class WarmMode : uint8_t { Random = 0, Recency = 1 };

struct RetrievalConfig {
    uint32_t warm_budget_k = 32;
    uint32_t prompt_cap_n = 48;
    WarmMode warm_mode = WarmMode::Recency;
    uint32_t embedding_dim = 64;

    bool operator==(const RetrievalConfig&) const = default;
};

struct LifecycleConfig {
    double sweep_interval = 5.0;  // virtual seconds between sweeps
    uint32_t sweep_batch = 1024;
    uint32_t transition_queue_cap = 65536;

    bool operator==(const LifecycleConfig&) const = default;
};

struct PolicyConfig {
    double ttl_window = 0.0;     // seconds; 0 = entire run duration
    uint32_t lru_capacity = 512;

    bool operator==(const PolicyConfig&) const = default;
};

struct StoreConfig {
    uint64_t max_items = 0;  // 0 = unlimited
    std::string wal_path;    // empty = WAL off

    bool operator==(const StoreConfig&) const = default;
};

struct WorkloadSpec {
    uint64_t seed = 42;
    uint64_t n_writes = 5000;
    uint64_t n_recalls = 1000;
    uint64_t n_asks = 1000;
    uint32_t n_topics = 50;
    uint32_t n_high_topics = 6;        // seeded subset holding high-value items
    double high_value_fraction = 0.2;  // P(write is a high-value fact)
    double high_value_threshold = 0.8;
    double stale_fraction = 0.7;  // share of low-value writes that are epoch-tagged stale notes
    double stale_high_topic_bias = 0.9;  // stale notes land in high-value topics with this prob
    double live_stale_fraction = 0.6;    // stale tagged with the current epoch (rest backdated)
    uint32_t epoch_size = 70;     // writes per topic before its epoch advances
    double virtual_tick = 0.5;    // seconds advanced per event
    double old_reference_fraction = 0.5;
    double hv_query_bias = 0.8;    // recent queries target a high-value write with this prob
    uint32_t recent_window = 500;  // "recent" = last this-many writes
    std::string namespace_tag = "default";

    bool operator==(const WorkloadSpec&) const = default;
};

struct PipelineConfig {
    uint32_t conversation_turns = 4;
    uint64_t embed_seed = 7;
    double answer_delay_us_per_token = 0.0;  // synthetic tail knob, off by default

    bool operator==(const PipelineConfig&) const = default;
};

struct HarnessConfig {
    uint32_t workers = 1;  // >1 is non-deterministic in content fields

    bool operator==(const HarnessConfig&) const = default;
};

struct GatewayConfig {
    std::string listen_address = "127.0.0.1";
    uint16_t port = 8080;
    std::string namespaces = "default";  // comma-separated allowlist
    uint32_t workers = 4;

    bool operator==(const GatewayConfig&) const = default;
};

struct EngineConfig {
    ValueParams value;
    LifecycleThresholds thresholds;
    RetrievalConfig retrieval;
    LifecycleConfig lifecycle;
    PolicyConfig policy;
    StoreConfig store;
    WorkloadSpec workload;
    PipelineConfig pipeline;
    HarnessConfig harness;
    GatewayConfig gateway;

    bool operator==(const EngineConfig&) const = default;
};

// Validated bundle of the three request-path configs.
struct ValidatedConfig {
    ValueParams value;
    LifecycleThresholds thresholds;
    RetrievalConfig retrieval;
};

// Collects every violated invariant; throws ConfigError listing all of them.
ValidatedConfig validate_config(const ValueParams& params,
                                const LifecycleThresholds& thresholds,
                                const RetrievalConfig& retrieval);

// Validates the whole bundle (harness-facing).
void validate_engine_config(const EngineConfig& cfg);

// Flat key/value document, one [section] per module. Unknown keys are an
// error; parse(serialize(cfg)) == cfg.
std::string serialize_config(const EngineConfig& cfg);
EngineConfig parse_config_text(const std::string& text);
EngineConfig load_config_file(const std::string& path);

// Desk scale (5k/1k/1k) is the default; paper scale is §9.2's 50k/10k/10k.
void apply_scale(EngineConfig& cfg, const std::string& scale);

}  // namespace amvl
