#include "amvl/gateway.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

namespace amvl {

using nlohmann::json;

namespace {

struct ApiError {
    int status;
    const char* code;
    std::string message;
};

ApiError map_error(const Error& e) {
    switch (e.code()) {
        case ErrorCode::NotFound: return {404, "not_found", e.what()};
        case ErrorCode::Evicted: return {410, "evicted", e.what()};
        case ErrorCode::CapExceeded: return {400, "cap_exceeded", e.what()};
        case ErrorCode::DimensionMismatch: return {400, "dimension_mismatch", e.what()};
        case ErrorCode::FeedbackOutsideCandidates:
            return {400, "feedback_outside_candidates", e.what()};
        case ErrorCode::StorageFull: return {507, "storage_full", e.what()};
        case ErrorCode::ClockRegression: return {400, "clock_regression", e.what()};
        case ErrorCode::InvalidArgument: return {400, "invalid_argument", e.what()};
        default: return {500, "internal", e.what()};
    }
}

void respond_error(httplib::Response& res, const ApiError& err) {
    res.status = err.status;
    json body{{"error", {{"status", err.status}, {"code", err.code}, {"message", err.message}}}};
    res.set_content(body.dump(), "application/json");
}

}  // namespace

Gateway::Gateway(const EngineConfig& cfg, PolicyKind kind, const std::string& telemetry_path,
                 ClockMode clock_mode)
    : cfg_(cfg) {
    validate_engine_config(cfg_);
    if (!cfg_.gateway.namespaces.empty()) {
        std::string s = cfg_.gateway.namespaces;
        size_t pos = 0;
        while (pos <= s.size()) {
            size_t comma = s.find(',', pos);
            if (comma == std::string::npos) comma = s.size();
            std::string ns = s.substr(pos, comma - pos);
            if (!ns.empty()) namespaces_.insert(ns);
            pos = comma + 1;
        }
    }
    if (!telemetry_path.empty()) {
        sink_ = std::make_unique<TelemetrySink>(telemetry_path);
    }
    runtime_ = std::make_unique<Runtime>(cfg_, kind, resolve_ttl_window(cfg_), sink_.get(),
                                         clock_mode);
    server_ = std::make_unique<httplib::Server>();
    install_routes();
}

Gateway::~Gateway() { stop(); }

void Gateway::install_routes() {
    auto check_namespace = [this](const std::string& ns) {
        return namespaces_.empty() || namespaces_.count(ns) != 0;
    };

    auto parse_body = [](const httplib::Request& req, httplib::Response& res,
                         json& out) -> bool {
        try {
            out = json::parse(req.body);
            return true;
        } catch (const json::exception&) {
            respond_error(res, {400, "bad_json", "request body is not valid JSON"});
            return false;
        }
    };

    // Bench clients drive the virtual clock; live traffic just reads it.
    auto request_time = [this](const json& body) {
        if (runtime_->clock.mode() == ClockMode::Virtual && body.contains("t_virtual")) {
            double t = body["t_virtual"].get<double>();
            runtime_->clock.advance_to(t);
            return t;
        }
        return runtime_->clock.now();
    };
    auto request_index = [this](const json& body) {
        if (body.contains("request_index")) return body["request_index"].get<uint64_t>();
        return request_counter_.fetch_add(1);
    };

    server_->Post("/v1/write", [=, this](const httplib::Request& req, httplib::Response& res) {
        json body;
        if (!parse_body(req, res, body)) return;
        std::string ns = body.value("namespace", "default");
        std::string content = body.value("content", "");
        if (content.empty()) {
            respond_error(res, {400, "empty_content", "content must be non-empty"});
            return;
        }
        if (!check_namespace(ns)) {
            respond_error(res, {403, "unknown_namespace", "namespace not in allowlist: " + ns});
            return;
        }
        try {
            double t = request_time(body);
            uint64_t idx = request_index(body);
            double label = body.value("label_value", 0.0);
            ItemId id = runtime_->pipeline.write(content, label, t, idx, ns);
            Tier tier = runtime_->store.get(id).tier;
            json out{{"id", id}, {"tier", tier_name(tier)}};
            res.set_content(out.dump(), "application/json");
        } catch (const Error& e) {
            respond_error(res, map_error(e));
            return;
        }
        runtime_->lifecycle.maybe_sweep();
    });

    server_->Post("/v1/recall", [=, this](const httplib::Request& req, httplib::Response& res) {
        json body;
        if (!parse_body(req, res, body)) return;
        std::string ns = body.value("namespace", "default");
        std::string query = body.value("query", "");
        if (!check_namespace(ns)) {
            respond_error(res, {403, "unknown_namespace", "namespace not in allowlist: " + ns});
            return;
        }
        try {
            double t = request_time(body);
            uint64_t idx = request_index(body);
            uint32_t n = body.value("n", 0u);
            AskRequest ask_req{query, ns, t, idx, RequestKind::Recall};
            RecallResult r = runtime_->pipeline.recall(ask_req, n);
            json hits = json::array();
            for (size_t i = 0; i < r.hits.size(); ++i) {
                json h{{"id", r.hits[i].id}, {"similarity", r.hits[i].similarity}};
                if (i < r.injected.size()) h["content"] = r.injected[i].content;
                hits.push_back(std::move(h));
            }
            json out{{"hits", hits},
                     {"candidate_size", r.candidates.ids.size()},
                     {"vectors_scanned", r.vectors_scanned}};
            res.set_content(out.dump(), "application/json");
        } catch (const Error& e) {
            respond_error(res, map_error(e));
            return;
        }
        runtime_->lifecycle.maybe_sweep();
    });

    server_->Post("/v1/ask", [=, this](const httplib::Request& req, httplib::Response& res) {
        json body;
        if (!parse_body(req, res, body)) return;
        std::string ns = body.value("namespace", "default");
        std::string query = body.value("query", "");
        if (!check_namespace(ns)) {
            respond_error(res, {403, "unknown_namespace", "namespace not in allowlist: " + ns});
            return;
        }
        try {
            double t = request_time(body);
            uint64_t idx = request_index(body);
            AskRequest ask_req{query, ns, t, idx, RequestKind::Ask};
            AskResult a = runtime_->pipeline.ask(ask_req);
            json out{{"answer", a.answer},
                     {"citations", a.citations},
                     {"token_count", a.token_count}};
            res.set_content(out.dump(), "application/json");
        } catch (const Error& e) {
            respond_error(res, map_error(e));
            return;
        }
        runtime_->lifecycle.maybe_sweep();
    });

    server_->Get("/v1/stats", [this](const httplib::Request&, httplib::Response& res) {
        StoreStats s = runtime_->store.stats();
        json out{{"stored", s.stored},
                 {"hot", s.hot},
                 {"warm", s.warm},
                 {"cold", s.cold},
                 {"evictions", s.evictions},
                 {"tier_migrations", s.tier_migrations},
                 {"total_puts", s.total_puts}};
        res.set_content(out.dump(), "application/json");
    });
}

bool Gateway::listen() {
    return server_->listen(cfg_.gateway.listen_address, cfg_.gateway.port);
}

int Gateway::start_async() {
    int port = cfg_.gateway.port;
    if (port == 0) {
        port = server_->bind_to_any_port(cfg_.gateway.listen_address);
    } else if (!server_->bind_to_port(cfg_.gateway.listen_address, port)) {
        throw Error(ErrorCode::IoError, "cannot bind gateway port");
    }
    server_thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port;
}

void Gateway::stop() {
    if (server_) server_->stop();
    if (server_thread_.joinable()) server_thread_.join();
    if (sink_) {
        sink_->flush();
        sink_->close();
    }
}

}  // namespace amvl
