#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <unordered_set>

#include "amvl/harness.hpp"

namespace httplib {
class Server;
}

namespace amvl {

// Thin HTTP front end over one Runtime: POST /v1/write, /v1/recall, /v1/ask
// and GET /v1/stats. Namespace allowlist only; no auth. Bench clients may
// pass t_virtual/request_index so an HTTP-driven run replays exactly like an
// in-process one.
class Gateway {
public:
    Gateway(const EngineConfig& cfg, PolicyKind kind, const std::string& telemetry_path = "",
            ClockMode clock_mode = ClockMode::Wall);
    ~Gateway();

    // Binds and serves; blocks until stop().
    bool listen();
    // Binds to the configured (possibly 0) port, returns the bound port, and
    // serves on a background thread; for tests.
    int start_async();
    void stop();

    Runtime& runtime() { return *runtime_; }

private:
    void install_routes();

    EngineConfig cfg_;
    std::unordered_set<std::string> namespaces_;  // empty = allow any
    std::unique_ptr<TelemetrySink> sink_;
    std::unique_ptr<Runtime> runtime_;
    std::unique_ptr<httplib::Server> server_;
    std::atomic<uint64_t> request_counter_{0};
    std::thread server_thread_;
};

}  // namespace amvl
