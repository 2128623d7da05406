#include "amvl/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace amvl {
namespace {

std::string format_double(double v) {
    char buf[40];
    // round-trippable shortest form
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double back = 0.0;
    std::sscanf(buf, "%lg", &back);
    if (back == v) {
        char shorter[40];
        std::snprintf(shorter, sizeof(shorter), "%g", v);
        std::sscanf(shorter, "%lg", &back);
        if (back == v) return shorter;
    }
    return buf;
}

struct FieldDef {
    std::string section;
    std::string key;
    std::function<std::string(const EngineConfig&)> get;
    // returns false on a value parse failure
    std::function<bool(EngineConfig&, const std::string&)> set;
};

bool parse_f64(const std::string& s, double& out) {
    try {
        size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size();
    } catch (...) {
        return false;
    }
}

bool parse_u64(const std::string& s, uint64_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

template <typename T>
FieldDef num_field(std::string section, std::string key,
                   std::function<T&(EngineConfig&)> ref) {
    FieldDef f;
    f.section = std::move(section);
    f.key = std::move(key);
    if constexpr (std::is_floating_point_v<T>) {
        f.get = [ref](const EngineConfig& c) {
            return format_double(ref(const_cast<EngineConfig&>(c)));
        };
        f.set = [ref](EngineConfig& c, const std::string& s) {
            double v;
            if (!parse_f64(s, v)) return false;
            ref(c) = v;
            return true;
        };
    } else {
        f.get = [ref](const EngineConfig& c) {
            return std::to_string(ref(const_cast<EngineConfig&>(c)));
        };
        f.set = [ref](EngineConfig& c, const std::string& s) {
            uint64_t v;
            if (!parse_u64(s, v)) return false;
            ref(c) = static_cast<T>(v);
            return ref(c) == v;  // reject overflow of narrow fields
        };
    }
    return f;
}

#define F64_FIELD(sec, name, expr)                           \
    num_field<double>(sec, name,                               \
                      std::function<double&(EngineConfig&)>(   \
                          [](EngineConfig& c) -> double& { return expr; }))
#define UINT_FIELD(T, sec, name, expr)                  \
    num_field<T>(sec, name,                             \
                 std::function<T&(EngineConfig&)>(      \
                     [](EngineConfig& c) -> T& { return expr; }))

FieldDef str_field(std::string section, std::string key,
                   std::function<std::string&(EngineConfig&)> ref) {
    FieldDef f;
    f.section = std::move(section);
    f.key = std::move(key);
    f.get = [ref](const EngineConfig& c) { return ref(const_cast<EngineConfig&>(c)); };
    f.set = [ref](EngineConfig& c, const std::string& s) {
        ref(c) = s;
        return true;
    };
    return f;
}

const std::vector<FieldDef>& schema() {
    static const std::vector<FieldDef> defs = [] {
        std::vector<FieldDef> v;
        v.push_back(F64_FIELD("value", "alpha", c.value.alpha));
        v.push_back(F64_FIELD("value", "beta", c.value.beta));
        v.push_back(F64_FIELD("value", "lambda", c.value.lambda));
        v.push_back(F64_FIELD("value", "v_max", c.value.v_max));
        v.push_back(F64_FIELD("value", "v_init", c.value.v_init));

        v.push_back(F64_FIELD("lifecycle", "theta_h_up", c.thresholds.theta_h_up));
        v.push_back(F64_FIELD("lifecycle", "theta_h_down", c.thresholds.theta_h_down));
        v.push_back(F64_FIELD("lifecycle", "theta_w_up", c.thresholds.theta_w_up));
        v.push_back(F64_FIELD("lifecycle", "theta_w_down", c.thresholds.theta_w_down));
        v.push_back(F64_FIELD("lifecycle", "theta_e", c.thresholds.theta_e));
        v.push_back(F64_FIELD("lifecycle", "sweep_interval", c.lifecycle.sweep_interval));
        v.push_back(UINT_FIELD(uint32_t, "lifecycle", "sweep_batch", c.lifecycle.sweep_batch));
        v.push_back(UINT_FIELD(uint32_t, "lifecycle", "transition_queue_cap",
                               c.lifecycle.transition_queue_cap));

        v.push_back(UINT_FIELD(uint32_t, "retrieval", "warm_budget_k", c.retrieval.warm_budget_k));
        v.push_back(UINT_FIELD(uint32_t, "retrieval", "prompt_cap_n", c.retrieval.prompt_cap_n));
        v.push_back(UINT_FIELD(uint32_t, "retrieval", "embedding_dim", c.retrieval.embedding_dim));
        {
            FieldDef f;
            f.section = "retrieval";
            f.key = "warm_mode";
            f.get = [](const EngineConfig& c) {
                return c.retrieval.warm_mode == WarmMode::Random ? "random" : "recency";
            };
            f.set = [](EngineConfig& c, const std::string& s) {
                if (s == "random") {
                    c.retrieval.warm_mode = WarmMode::Random;
                } else if (s == "recency") {
                    c.retrieval.warm_mode = WarmMode::Recency;
                } else {
                    return false;
                }
                return true;
            };
            v.push_back(std::move(f));
        }

        v.push_back(F64_FIELD("policy", "ttl_window", c.policy.ttl_window));
        v.push_back(UINT_FIELD(uint32_t, "policy", "lru_capacity", c.policy.lru_capacity));

        v.push_back(UINT_FIELD(uint64_t, "store", "max_items", c.store.max_items));
        v.push_back(str_field("store", "wal_path",
                              [](EngineConfig& c) -> std::string& { return c.store.wal_path; }));

        v.push_back(UINT_FIELD(uint64_t, "workload", "seed", c.workload.seed));
        v.push_back(UINT_FIELD(uint64_t, "workload", "n_writes", c.workload.n_writes));
        v.push_back(UINT_FIELD(uint64_t, "workload", "n_recalls", c.workload.n_recalls));
        v.push_back(UINT_FIELD(uint64_t, "workload", "n_asks", c.workload.n_asks));
        v.push_back(UINT_FIELD(uint32_t, "workload", "n_topics", c.workload.n_topics));
        v.push_back(UINT_FIELD(uint32_t, "workload", "n_high_topics", c.workload.n_high_topics));
        v.push_back(F64_FIELD("workload", "high_value_fraction", c.workload.high_value_fraction));
        v.push_back(F64_FIELD("workload", "high_value_threshold", c.workload.high_value_threshold));
        v.push_back(F64_FIELD("workload", "stale_fraction", c.workload.stale_fraction));
        v.push_back(F64_FIELD("workload", "stale_high_topic_bias",
                              c.workload.stale_high_topic_bias));
        v.push_back(F64_FIELD("workload", "live_stale_fraction",
                              c.workload.live_stale_fraction));
        v.push_back(UINT_FIELD(uint32_t, "workload", "epoch_size", c.workload.epoch_size));
        v.push_back(F64_FIELD("workload", "virtual_tick", c.workload.virtual_tick));
        v.push_back(
            F64_FIELD("workload", "old_reference_fraction", c.workload.old_reference_fraction));
        v.push_back(F64_FIELD("workload", "hv_query_bias", c.workload.hv_query_bias));
        v.push_back(UINT_FIELD(uint32_t, "workload", "recent_window", c.workload.recent_window));
        v.push_back(str_field("workload", "namespace", [](EngineConfig& c) -> std::string& {
            return c.workload.namespace_tag;
        }));

        v.push_back(
            UINT_FIELD(uint32_t, "pipeline", "conversation_turns", c.pipeline.conversation_turns));
        v.push_back(UINT_FIELD(uint64_t, "pipeline", "embed_seed", c.pipeline.embed_seed));
        v.push_back(F64_FIELD("pipeline", "answer_delay_us_per_token",
                              c.pipeline.answer_delay_us_per_token));

        v.push_back(UINT_FIELD(uint32_t, "harness", "workers", c.harness.workers));

        v.push_back(str_field("gateway", "listen_address", [](EngineConfig& c) -> std::string& {
            return c.gateway.listen_address;
        }));
        v.push_back(UINT_FIELD(uint16_t, "gateway", "port", c.gateway.port));
        v.push_back(str_field("gateway", "namespaces", [](EngineConfig& c) -> std::string& {
            return c.gateway.namespaces;
        }));
        v.push_back(UINT_FIELD(uint32_t, "gateway", "workers", c.gateway.workers));
        return v;
    }();
    return defs;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

ValidatedConfig validate_config(const ValueParams& p, const LifecycleThresholds& t,
                                const RetrievalConfig& r) {
    std::vector<ConfigViolation> bad;
    auto require = [&](bool ok, const char* field, const char* constraint) {
        if (!ok) bad.push_back({field, constraint});
    };

    require(p.alpha > 0.0, "value.alpha", "alpha > 0");
    require(p.beta > 0.0, "value.beta", "beta > 0");
    require(p.beta >= p.alpha, "value.beta", "beta >= alpha");
    require(p.lambda > 0.0, "value.lambda", "lambda > 0");
    require(p.v_max > 0.0, "value.v_max", "v_max > 0");
    require(p.v_init >= 0.0, "value.v_init", "v_init >= 0");
    require(p.v_init <= p.v_max, "value.v_init", "v_init <= v_max");

    require(t.theta_e >= 0.0, "lifecycle.theta_e", "theta_e >= 0");
    require(t.theta_h_up > t.theta_h_down, "lifecycle.thresholds",
            "ordering theta_h_up > theta_h_down");
    require(t.theta_h_down > t.theta_w_up, "lifecycle.thresholds",
            "ordering theta_h_down > theta_w_up");
    require(t.theta_w_up > t.theta_w_down, "lifecycle.thresholds",
            "ordering theta_w_up > theta_w_down");
    require(t.theta_w_down > t.theta_e, "lifecycle.thresholds",
            "ordering theta_w_down > theta_e");

    require(r.prompt_cap_n >= 1, "retrieval.prompt_cap_n", "prompt_cap_n >= 1");
    require(r.embedding_dim >= 1, "retrieval.embedding_dim", "embedding_dim >= 1");

    if (!bad.empty()) throw ConfigError(std::move(bad));
    return ValidatedConfig{p, t, r};
}

void validate_engine_config(const EngineConfig& cfg) {
    std::vector<ConfigViolation> bad;
    try {
        validate_config(cfg.value, cfg.thresholds, cfg.retrieval);
    } catch (const ConfigError& e) {
        bad = e.violations();
    }
    auto require = [&](bool ok, const char* field, const char* constraint) {
        if (!ok) bad.push_back({field, constraint});
    };
    require(cfg.lifecycle.sweep_interval > 0.0, "lifecycle.sweep_interval", "sweep_interval > 0");
    require(cfg.lifecycle.sweep_batch >= 1, "lifecycle.sweep_batch", "sweep_batch >= 1");
    require(cfg.policy.ttl_window >= 0.0, "policy.ttl_window", "ttl_window >= 0");
    require(cfg.policy.lru_capacity >= 1, "policy.lru_capacity", "lru_capacity >= 1");
    require(cfg.workload.n_topics >= 1, "workload.n_topics", "n_topics >= 1");
    require(cfg.workload.n_high_topics >= 1 && cfg.workload.n_high_topics <= cfg.workload.n_topics,
            "workload.n_high_topics", "1 <= n_high_topics <= n_topics");
    require(cfg.workload.high_value_fraction >= 0.0 && cfg.workload.high_value_fraction <= 1.0,
            "workload.high_value_fraction", "in [0,1]");
    require(cfg.workload.high_value_threshold >= 0.0 && cfg.workload.high_value_threshold <= 1.0,
            "workload.high_value_threshold", "in [0,1]");
    require(cfg.workload.stale_fraction >= 0.0 && cfg.workload.stale_fraction <= 1.0,
            "workload.stale_fraction", "in [0,1]");
    require(cfg.workload.stale_high_topic_bias >= 0.0 && cfg.workload.stale_high_topic_bias <= 1.0,
            "workload.stale_high_topic_bias", "in [0,1]");
    require(cfg.workload.live_stale_fraction >= 0.0 && cfg.workload.live_stale_fraction <= 1.0,
            "workload.live_stale_fraction", "in [0,1]");
    require(cfg.workload.epoch_size >= 1, "workload.epoch_size", "epoch_size >= 1");
    require(cfg.workload.virtual_tick > 0.0, "workload.virtual_tick", "virtual_tick > 0");
    require(cfg.workload.old_reference_fraction >= 0.0 &&
                cfg.workload.old_reference_fraction <= 1.0,
            "workload.old_reference_fraction", "in [0,1]");
    require(cfg.workload.hv_query_bias >= 0.0 && cfg.workload.hv_query_bias <= 1.0,
            "workload.hv_query_bias", "in [0,1]");
    require(cfg.workload.recent_window >= 1, "workload.recent_window", "recent_window >= 1");
    require(cfg.harness.workers >= 1, "harness.workers", "workers >= 1");
    require(cfg.gateway.workers >= 1, "gateway.workers", "workers >= 1");
    if (!bad.empty()) throw ConfigError(std::move(bad));
}

std::string serialize_config(const EngineConfig& cfg) {
    std::ostringstream out;
    std::string current;
    for (const auto& f : schema()) {
        if (f.section != current) {
            if (!current.empty()) out << "\n";
            out << "[" << f.section << "]\n";
            current = f.section;
        }
        out << f.key << " = " << f.get(cfg) << "\n";
    }
    return out.str();
}

EngineConfig parse_config_text(const std::string& text) {
    EngineConfig cfg;
    std::vector<ConfigViolation> bad;
    std::istringstream in(text);
    std::string line;
    std::string section;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                bad.push_back({"line " + std::to_string(line_no), "malformed section header"});
                continue;
            }
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            bad.push_back({"line " + std::to_string(line_no), "expected key = value"});
            continue;
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        const FieldDef* match = nullptr;
        for (const auto& f : schema()) {
            if (f.section == section && f.key == key) {
                match = &f;
                break;
            }
        }
        if (!match) {
            bad.push_back({section + "." + key, "unknown key"});
            continue;
        }
        if (!match->set(cfg, value)) {
            bad.push_back({section + "." + key, "unparseable value '" + value + "'"});
        }
    }
    if (!bad.empty()) throw ConfigError(std::move(bad));
    return cfg;
}

EngineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

void apply_scale(EngineConfig& cfg, const std::string& scale) {
    if (scale == "desk") {
        cfg.workload.n_writes = 5000;
        cfg.workload.n_recalls = 1000;
        cfg.workload.n_asks = 1000;
    } else if (scale == "paper") {
        cfg.workload.n_writes = 50000;
        cfg.workload.n_recalls = 10000;
        cfg.workload.n_asks = 10000;
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown scale '" + scale + "' (desk|paper)");
    }
}

}  // namespace amvl
