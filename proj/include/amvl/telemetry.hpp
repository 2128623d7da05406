#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "amvl/types.hpp"

namespace amvl {

struct PhaseDurations {
    double embed_us = 0.0;
    double candidates_us = 0.0;
    double scan_us = 0.0;
    double assemble_us = 0.0;
    double answer_us = 0.0;
    double feedback_us = 0.0;
};

// One NDJSON line per request.
struct RequestRecord {
    int64_t ts_wall_us = 0;
    double t_virtual = 0.0;
    uint64_t request_index = 0;
    RequestKind kind = RequestKind::Write;
    PolicyKind policy = PolicyKind::AMVL;
    bool ok = true;
    size_t candidate_size = 0;
    size_t hot_count = 0;
    size_t warm_count = 0;
    size_t vectors_scanned = 0;
    size_t injected_count = 0;
    size_t token_count = 0;
    PhaseDurations phases;
    double latency_us = 0.0;
    std::vector<ItemId> injected_ids;
    std::vector<double> injected_sims;
    std::vector<double> injected_labels;
};

// One NDJSON line per maintenance sweep.
struct LifecycleSnapshotRecord {
    int64_t ts_wall_us = 0;
    double t_virtual = 0.0;
    size_t hot = 0;
    size_t warm = 0;
    size_t cold = 0;
    size_t stored = 0;
    uint64_t evicted_total = 0;
    size_t sweep_visited = 0;
    size_t sweep_promoted = 0;
    size_t sweep_demoted = 0;
    size_t sweep_evicted = 0;
    ItemId cursor = 0;
};

// Hand-rolled formatting (std::to_chars); these run on the request path and
// must cost the same for every policy.
std::string format_request_line(const RequestRecord& r);
std::string format_lifecycle_line(const LifecycleSnapshotRecord& r);

// NDJSON sink: producers enqueue finished lines, one consumer thread drains
// to disk. The queue is bounded; producers block rather than drop records.
class TelemetrySink {
public:
    explicit TelemetrySink(const std::string& path, size_t queue_cap = 8192);
    ~TelemetrySink();

    TelemetrySink(const TelemetrySink&) = delete;
    TelemetrySink& operator=(const TelemetrySink&) = delete;

    void write_line(std::string line);
    void flush();  // drains the queue and flushes the file
    void close();

    const std::string& path() const { return path_; }

private:
    void run();

    std::string path_;
    std::ofstream out_;
    size_t queue_cap_;
    std::mutex mutex_;
    std::condition_variable cv_producer_;
    std::condition_variable cv_consumer_;
    std::deque<std::string> queue_;
    bool closing_ = false;
    bool idle_ = true;
    std::thread worker_;
};

}  // namespace amvl
