#include "amvl/telemetry.hpp"

#include <charconv>

#include "amvl/errors.hpp"

namespace amvl {

namespace {

void append_int(std::string& s, int64_t v) {
    char buf[24];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    s.append(buf, p);
}

void append_uint(std::string& s, uint64_t v) {
    char buf[24];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    s.append(buf, p);
}

void append_double(std::string& s, double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    s.append(buf, p);
}

void append_key(std::string& s, const char* key) {
    s += ",\"";
    s += key;
    s += "\":";
}

}  // namespace

std::string format_request_line(const RequestRecord& r) {
    std::string s;
    s.reserve(256 + r.injected_ids.size() * 32);
    s += "{\"type\":\"request\"";
    append_key(s, "ts_wall_us");
    append_int(s, r.ts_wall_us);
    append_key(s, "t_virtual");
    append_double(s, r.t_virtual);
    append_key(s, "request_index");
    append_uint(s, r.request_index);
    append_key(s, "kind");
    s += '"';
    s += request_kind_name(r.kind);
    s += '"';
    append_key(s, "policy");
    s += '"';
    s += policy_name(r.policy);
    s += '"';
    append_key(s, "ok");
    s += r.ok ? "true" : "false";
    append_key(s, "candidate_size");
    append_uint(s, r.candidate_size);
    append_key(s, "hot_count");
    append_uint(s, r.hot_count);
    append_key(s, "warm_count");
    append_uint(s, r.warm_count);
    append_key(s, "vectors_scanned");
    append_uint(s, r.vectors_scanned);
    append_key(s, "injected_count");
    append_uint(s, r.injected_count);
    append_key(s, "token_count");
    append_uint(s, r.token_count);
    s += ",\"phase_durations_us\":{\"embed\":";
    append_double(s, r.phases.embed_us);
    s += ",\"candidates\":";
    append_double(s, r.phases.candidates_us);
    s += ",\"scan\":";
    append_double(s, r.phases.scan_us);
    s += ",\"assemble\":";
    append_double(s, r.phases.assemble_us);
    s += ",\"answer\":";
    append_double(s, r.phases.answer_us);
    s += ",\"feedback\":";
    append_double(s, r.phases.feedback_us);
    s += '}';
    append_key(s, "latency_us");
    append_double(s, r.latency_us);
    append_key(s, "injected_ids");
    s += '[';
    for (size_t i = 0; i < r.injected_ids.size(); ++i) {
        if (i) s += ',';
        append_uint(s, r.injected_ids[i]);
    }
    s += ']';
    append_key(s, "injected_sims");
    s += '[';
    for (size_t i = 0; i < r.injected_sims.size(); ++i) {
        if (i) s += ',';
        append_double(s, r.injected_sims[i]);
    }
    s += ']';
    append_key(s, "injected_label_values");
    s += '[';
    for (size_t i = 0; i < r.injected_labels.size(); ++i) {
        if (i) s += ',';
        append_double(s, r.injected_labels[i]);
    }
    s += "]}";
    return s;
}

std::string format_lifecycle_line(const LifecycleSnapshotRecord& r) {
    std::string s;
    s.reserve(220);
    s += "{\"type\":\"lifecycle_snapshot\"";
    append_key(s, "ts_wall_us");
    append_int(s, r.ts_wall_us);
    append_key(s, "t_virtual");
    append_double(s, r.t_virtual);
    append_key(s, "hot");
    append_uint(s, r.hot);
    append_key(s, "warm");
    append_uint(s, r.warm);
    append_key(s, "cold");
    append_uint(s, r.cold);
    append_key(s, "stored");
    append_uint(s, r.stored);
    append_key(s, "evicted_total");
    append_uint(s, r.evicted_total);
    append_key(s, "sweep_visited");
    append_uint(s, r.sweep_visited);
    append_key(s, "sweep_promoted");
    append_uint(s, r.sweep_promoted);
    append_key(s, "sweep_demoted");
    append_uint(s, r.sweep_demoted);
    append_key(s, "sweep_evicted");
    append_uint(s, r.sweep_evicted);
    append_key(s, "cursor");
    append_uint(s, r.cursor);
    s += '}';
    return s;
}

TelemetrySink::TelemetrySink(const std::string& path, size_t queue_cap)
    : path_(path), queue_cap_(queue_cap) {
    out_.open(path, std::ios::trunc);
    if (!out_) throw Error(ErrorCode::IoError, "cannot open telemetry file " + path);
    worker_ = std::thread([this] { run(); });
}

TelemetrySink::~TelemetrySink() { close(); }

void TelemetrySink::write_line(std::string line) {
    std::unique_lock lock(mutex_);
    cv_producer_.wait(lock, [&] { return queue_.size() < queue_cap_ || closing_; });
    if (closing_) return;
    queue_.push_back(std::move(line));
    idle_ = false;
    cv_consumer_.notify_one();
}

void TelemetrySink::run() {
    std::unique_lock lock(mutex_);
    for (;;) {
        cv_consumer_.wait(lock, [&] { return !queue_.empty() || closing_; });
        while (!queue_.empty()) {
            std::string line = std::move(queue_.front());
            queue_.pop_front();
            lock.unlock();
            out_ << line << '\n';
            lock.lock();
            cv_producer_.notify_one();
        }
        idle_ = true;
        cv_producer_.notify_all();
        if (closing_) break;
    }
    out_.flush();
}

void TelemetrySink::flush() {
    {
        std::unique_lock lock(mutex_);
        cv_producer_.wait(lock, [&] { return queue_.empty() && idle_; });
    }
    out_.flush();
}

void TelemetrySink::close() {
    {
        std::lock_guard lock(mutex_);
        if (closing_) {
            return;
        }
        closing_ = true;
        cv_consumer_.notify_all();
        cv_producer_.notify_all();
    }
    if (worker_.joinable()) worker_.join();
    out_.flush();
    out_.close();
}

}  // namespace amvl
