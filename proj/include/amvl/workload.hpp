#pragma once

#include <string>
#include <vector>

#include "amvl/config.hpp"
#include "amvl/types.hpp"

namespace amvl {

struct WorkloadEvent {
    uint64_t index = 0;
    double t_virtual = 0.0;
    RequestKind kind = RequestKind::Write;
    // write fields
    uint32_t topic = 0;
    double label = 0.0;
    std::string content;
    // recall/ask field
    std::string query_text;
};

// Deterministic event stream: writes, recalls and asks interleaved by a
// seeded schedule that preserves the configured totals exactly and the
// write:recall:ask ratio in every prefix. Same seed, same stream.
//
// Write mix: high-value facts (label in [threshold, 1]) live in a seeded
// subset of topics and carry topic-dominant token text; low-value writes are
// either near-topic "stale" items (same token shape, low label — the junk an
// age-based policy keeps eligible) or low-similarity background notes.
// Queries revisit recent high-value writes with probability hv_query_bias
// and reach back into the oldest third with old_reference_fraction.
std::vector<WorkloadEvent> generate_workload(const WorkloadSpec& spec);

// Total virtual duration of the stream (events * tick).
double workload_duration(const WorkloadSpec& spec);

// NDJSON trace export/import for cross-run replay; import(export(x)) == x.
void export_trace(const std::vector<WorkloadEvent>& events, const std::string& path);
std::vector<WorkloadEvent> import_trace(const std::string& path);

}  // namespace amvl
