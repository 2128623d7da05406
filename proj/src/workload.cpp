#include "amvl/workload.hpp"

#include <algorithm>
#include <deque>
#include <fstream>

#include <nlohmann/json.hpp>

#include "amvl/errors.hpp"
#include "amvl/rng.hpp"

namespace amvl {

using nlohmann::json;

namespace {

std::string topic_token(uint32_t topic) { return "t" + std::to_string(topic); }

std::string epoch_token(uint32_t topic, uint32_t epoch) {
    return "e" + std::to_string(topic) + "_" + std::to_string(epoch);
}

struct WriteInfo {
    uint32_t topic;
    uint32_t tag_epoch;  // epoch a query reaching back to this write should use
    bool high_value;
};

}  // namespace

double workload_duration(const WorkloadSpec& spec) {
    return static_cast<double>(spec.n_writes + spec.n_recalls + spec.n_asks) * spec.virtual_tick;
}

// Content scheme. Every topic advances through epochs (one per epoch_size
// writes to it). Three write shapes:
//   fact  (high label):  "T T T u"     — topic-dominant, matches the topic's
//                        queries in every epoch;
//   stale (low label):   "T T E E u"   — epoch-tagged notes that outscore
//                        facts for queries carrying the same epoch tag and
//                        are irrelevant to every other epoch. Most are
//                        backdated one epoch (archive notes about what was
//                        just discussed); a live_stale_fraction carry the
//                        current tag and pollute fresh queries equally for
//                        every policy;
//   background (low):    "u u u u T"   — never competitive.
// Queries: "T T T E E q", with E the topic's current epoch for recent-style
// queries and the target write's tag epoch for old-reference queries. An
// age-based store keeps every past epoch's archive eligible, so old tags
// bury its top-n in stale notes; value- and recency-managed stores have
// aged them out and answer from retained facts.
std::vector<WorkloadEvent> generate_workload(const WorkloadSpec& spec) {
    std::vector<WorkloadEvent> events;
    uint64_t total = spec.n_writes + spec.n_recalls + spec.n_asks;
    events.reserve(total);

    DetRng rng_schedule = DetRng::derive(spec.seed, fnv1a("schedule"));
    DetRng rng_write = DetRng::derive(spec.seed, fnv1a("write"));
    DetRng rng_query = DetRng::derive(spec.seed, fnv1a("query"));
    DetRng rng_topics = DetRng::derive(spec.seed, fnv1a("topics"));

    // seeded subset of topics holding the high-value facts
    std::vector<uint32_t> all_topics(spec.n_topics);
    for (uint32_t i = 0; i < spec.n_topics; ++i) all_topics[i] = i;
    uint32_t n_high = std::min(spec.n_high_topics, spec.n_topics);
    for (uint32_t i = 0; i < n_high; ++i) {
        uint32_t j = i + static_cast<uint32_t>(rng_topics.next_below(spec.n_topics - i));
        std::swap(all_topics[i], all_topics[j]);
    }
    std::vector<uint32_t> high_topics(all_topics.begin(), all_topics.begin() + n_high);

    std::vector<WriteInfo> writes;
    writes.reserve(spec.n_writes);
    std::deque<uint64_t> recent_hv;  // indices into `writes`, within the recent window
    std::vector<uint32_t> topic_writes(spec.n_topics, 0);

    uint64_t remaining_w = spec.n_writes;
    uint64_t remaining_r = spec.n_recalls;
    uint64_t remaining_a = spec.n_asks;
    uint64_t unique_counter = 0;

    auto current_epoch = [&](uint32_t topic) { return topic_writes[topic] / spec.epoch_size; };

    auto make_query = [&](uint64_t index, double t, RequestKind kind) {
        WorkloadEvent ev;
        ev.index = index;
        ev.t_virtual = t;
        ev.kind = kind;
        uint32_t topic;
        uint32_t epoch;
        if (writes.empty()) {
            topic = static_cast<uint32_t>(rng_query.next_below(spec.n_topics));
            epoch = 0;
        } else {
            uint64_t old_pool = writes.size() / 3;
            bool old_ref =
                old_pool > 0 && rng_query.next_double() < spec.old_reference_fraction;
            if (old_ref) {
                // topic from the oldest third; reach into any epoch at least
                // two behind the present, so no single archive is queried
                // often enough to stay warm on access alone and none of the
                // targets still sit in the recent-write window
                topic = writes[rng_query.next_below(old_pool)].topic;
                uint32_t cur = current_epoch(topic);
                epoch = cur < 2 ? cur : static_cast<uint32_t>(rng_query.next_below(cur - 1));
            } else {
                uint64_t window = std::min<uint64_t>(spec.recent_window, writes.size());
                uint64_t window_start = writes.size() - window;
                while (!recent_hv.empty() && recent_hv.front() < window_start) {
                    recent_hv.pop_front();
                }
                if (!recent_hv.empty() && rng_query.next_double() < spec.hv_query_bias) {
                    topic = writes[recent_hv[rng_query.next_below(recent_hv.size())]].topic;
                } else {
                    topic = writes[window_start + rng_query.next_below(window)].topic;
                }
                epoch = current_epoch(topic);
            }
        }
        std::string tt = topic_token(topic);
        std::string et = epoch_token(topic, epoch);
        ev.topic = topic;
        ev.query_text = tt + " " + tt + " " + tt + " " + et + " " + et;
        ev.query_text += " q" + std::to_string(unique_counter++);
        return ev;
    };

    for (uint64_t i = 0; i < total; ++i) {
        double t = static_cast<double>(i) * spec.virtual_tick;
        uint64_t remaining = remaining_w + remaining_r + remaining_a;
        uint64_t pick = rng_schedule.next_below(remaining);
        if (pick < remaining_w) {
            --remaining_w;
            WorkloadEvent ev;
            ev.index = i;
            ev.t_virtual = t;
            ev.kind = RequestKind::Write;
            bool high = rng_write.next_double() < spec.high_value_fraction;
            uint32_t topic;
            uint32_t tag;
            if (high) {
                topic = high_topics[rng_write.next_below(high_topics.size())];
                tag = current_epoch(topic) == 0 ? 0 : current_epoch(topic) - 1;
                ev.label = spec.high_value_threshold +
                           rng_write.next_double() * (1.0 - spec.high_value_threshold);
                std::string tt = topic_token(topic);
                ev.content = tt + " " + tt + " " + tt;
                ev.content += " w" + std::to_string(unique_counter++);
            } else {
                ev.label = rng_write.next_double() * 0.6;
                bool stale = rng_write.next_double() < spec.stale_fraction;
                if (stale) {
                    topic = rng_write.next_double() < spec.stale_high_topic_bias
                                ? high_topics[rng_write.next_below(high_topics.size())]
                                : static_cast<uint32_t>(rng_write.next_below(spec.n_topics));
                    uint32_t e = current_epoch(topic);
                    bool live = rng_write.next_double() < spec.live_stale_fraction;
                    tag = (live || e == 0) ? e : e - 1;
                    std::string tt = topic_token(topic);
                    std::string et = epoch_token(topic, tag);
                    ev.content = tt + " " + tt + " " + et + " " + et;
                    ev.content += " w" + std::to_string(unique_counter++);
                } else {
                    topic = static_cast<uint32_t>(rng_write.next_below(spec.n_topics));
                    uint32_t e = current_epoch(topic);
                    tag = e == 0 ? 0 : e - 1;
                    ev.content = "w" + std::to_string(unique_counter++);
                    for (int u = 0; u < 3; ++u) {
                        ev.content += " w" + std::to_string(unique_counter++);
                    }
                    ev.content += " " + topic_token(topic);
                }
            }
            ev.topic = topic;
            writes.push_back(WriteInfo{topic, tag, high});
            ++topic_writes[topic];
            if (high) recent_hv.push_back(writes.size() - 1);
            events.push_back(std::move(ev));
        } else if (pick < remaining_w + remaining_r) {
            --remaining_r;
            events.push_back(make_query(i, t, RequestKind::Recall));
        } else {
            --remaining_a;
            events.push_back(make_query(i, t, RequestKind::Ask));
        }
    }
    return events;
}

void export_trace(const std::vector<WorkloadEvent>& events, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write trace " + path);
    for (const auto& ev : events) {
        json rec{{"index", ev.index},
                 {"t", ev.t_virtual},
                 {"kind", request_kind_name(ev.kind)}};
        if (ev.kind == RequestKind::Write) {
            rec["topic"] = ev.topic;
            rec["label"] = ev.label;
            rec["content"] = ev.content;
        } else {
            rec["topic"] = ev.topic;
            rec["query"] = ev.query_text;
        }
        out << rec.dump() << '\n';
    }
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

std::vector<WorkloadEvent> import_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open trace " + path);
    std::vector<WorkloadEvent> events;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception&) {
            throw Error(ErrorCode::ParseError, "trace line " + std::to_string(line_no));
        }
        WorkloadEvent ev;
        ev.index = rec.at("index").get<uint64_t>();
        ev.t_virtual = rec.at("t").get<double>();
        std::string kind = rec.at("kind").get<std::string>();
        if (kind == "write") {
            ev.kind = RequestKind::Write;
            ev.topic = rec.at("topic").get<uint32_t>();
            ev.label = rec.at("label").get<double>();
            ev.content = rec.at("content").get<std::string>();
        } else if (kind == "recall" || kind == "ask") {
            ev.kind = kind == "recall" ? RequestKind::Recall : RequestKind::Ask;
            ev.topic = rec.value("topic", 0u);
            ev.query_text = rec.at("query").get<std::string>();
        } else {
            throw Error(ErrorCode::SchemaError, "unknown kind at line " + std::to_string(line_no));
        }
        events.push_back(std::move(ev));
    }
    return events;
}

}  // namespace amvl
