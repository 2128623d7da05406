#include <CLI11.hpp>

#include <iostream>

#include "amvl/acceptance.hpp"
#include "amvl/analysis.hpp"
#include "amvl/gateway.hpp"
#include "amvl/harness.hpp"

using namespace amvl;

namespace {

PolicyKind parse_policy(const std::string& name) {
    if (name == "ttl") return PolicyKind::TTL;
    if (name == "lru") return PolicyKind::LRU;
    if (name == "amvl") return PolicyKind::AMVL;
    throw CLI::ValidationError("policy must be one of: ttl, lru, amvl");
}

EngineConfig load_or_default(const std::string& config_path) {
    if (config_path.empty()) return EngineConfig{};
    return load_config_file(config_path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"amvl: lifecycle-managed agent-memory engine and benchmark harness"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "three-run benchmark: TTL, LRU, AMV-L over one trace");
    std::string config_path, out_dir = "out", scale = "desk", export_trace_path;
    std::vector<std::string> policy_names;
    uint64_t seed = 0;
    bool seed_set = false, check = false;
    uint32_t workers = 0;
    run->add_option("--config", config_path, "config file (flat key/value sections)");
    run->add_option("--out", out_dir, "output directory")->capture_default_str();
    bool scale_set = false;
    run->add_option("--scale", scale, "desk|paper (overrides config counts)")
        ->capture_default_str()
        ->each([&](const std::string&) { scale_set = true; });
    run->add_option("--seed", seed, "workload seed override")->each([&](const std::string&) {
        seed_set = true;
    });
    run->add_option("--policy", policy_names, "policy subset (repeatable): ttl|lru|amvl");
    run->add_flag("--check", check, "run the acceptance criteria after the benchmark");
    run->add_option("--export-trace", export_trace_path, "write the generated trace as NDJSON");
    run->add_option("--workers", workers, "request worker count (>1 is non-deterministic)");

    // replay
    auto* replay = app.add_subcommand("replay", "replay an exported trace under one policy");
    std::string replay_trace, replay_policy = "amvl", replay_out = "out_replay",
                replay_config;
    replay->add_option("--trace", replay_trace, "trace NDJSON path")->required();
    replay->add_option("--policy", replay_policy, "ttl|lru|amvl")->capture_default_str();
    replay->add_option("--out", replay_out, "output directory")->capture_default_str();
    replay->add_option("--config", replay_config, "config file");

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP gateway mode");
    std::string serve_config, serve_policy = "amvl", serve_telemetry;
    std::string listen_address;
    uint16_t port = 0;
    bool port_set = false;
    serve->add_option("--config", serve_config, "config file");
    serve->add_option("--policy", serve_policy, "ttl|lru|amvl")->capture_default_str();
    serve->add_option("--listen", listen_address, "listen address override");
    serve->add_option("--port", port, "port override")->each([&](const std::string&) {
        port_set = true;
    });
    serve->add_option("--telemetry", serve_telemetry, "NDJSON telemetry output path");

    // analyze
    auto* analyze_cmd = app.add_subcommand("analyze", "offline analysis of one telemetry file");
    std::string analyze_path, analyze_out;
    analyze_cmd->add_option("--telemetry", analyze_path, "telemetry NDJSON path")->required();
    analyze_cmd->add_option("--out", analyze_out, "report JSON path (stdout if omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            RunOptions opts;
            opts.cfg = load_or_default(config_path);
            if (scale_set) apply_scale(opts.cfg, scale);
            if (seed_set) opts.cfg.workload.seed = seed;
            if (workers != 0) opts.cfg.harness.workers = workers;
            opts.out_dir = out_dir;
            opts.scale = scale;
            opts.check = check;
            opts.export_trace_path = export_trace_path;
            if (!policy_names.empty()) {
                opts.policies.clear();
                for (const auto& name : policy_names) opts.policies.push_back(parse_policy(name));
            }
            return run_benchmark(opts);
        }
        if (*replay) {
            EngineConfig cfg = load_or_default(replay_config);
            return replay_trace_file(cfg, replay_trace, parse_policy(replay_policy), replay_out);
        }
        if (*serve) {
            EngineConfig cfg = load_or_default(serve_config);
            if (!listen_address.empty()) cfg.gateway.listen_address = listen_address;
            if (port_set) cfg.gateway.port = port;
            Gateway gateway(cfg, parse_policy(serve_policy), serve_telemetry, ClockMode::Wall);
            gateway.runtime().lifecycle.start_background(cfg.lifecycle.sweep_interval);
            std::cout << "listening on " << cfg.gateway.listen_address << ":" << cfg.gateway.port
                      << std::endl;
            return gateway.listen() ? 0 : 1;
        }
        if (*analyze_cmd) {
            RunReport report = analyze(analyze_path);
            auto j = report_to_json(report);
            if (analyze_out.empty()) {
                std::cout << j.dump(2) << std::endl;
            } else {
                std::ofstream out(analyze_out, std::ios::trunc);
                out << j.dump(2) << "\n";
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
