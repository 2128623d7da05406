#include "amvl/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include "amvl/rng.hpp"
#include "amvl/value_model.hpp"

namespace amvl {

namespace {

constexpr std::string_view kSystemPrompt =
    "You are a long-running assistant. Use the provided memory items when they are relevant "
    "to the question.";

double elapsed_us(std::chrono::steady_clock::time_point from) {
    auto d = std::chrono::steady_clock::now() - from;
    return std::chrono::duration<double, std::micro>(d).count();
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace

size_t count_tokens(std::string_view text) {
    size_t count = 0;
    bool in_token = false;
    for (char c : text) {
        if (is_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

Embedder::Embedder(uint32_t dim, uint64_t seed) : dim_(dim), seed_(seed) {}

const std::vector<double>& Embedder::token_vector(uint64_t token_hash) const {
    {
        std::shared_lock lock(cache_mutex_);
        auto it = cache_.find(token_hash);
        if (it != cache_.end()) return it->second;
    }
    DetRng rng = DetRng::derive(seed_, token_hash, fnv1a("token"));
    std::vector<double> v(dim_);
    double norm2 = 0.0;
    for (uint32_t i = 0; i < dim_; ++i) {
        v[i] = rng.next_gaussian();
        norm2 += v[i] * v[i];
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    std::unique_lock lock(cache_mutex_);
    return cache_.emplace(token_hash, std::move(v)).first->second;
}

std::vector<float> Embedder::embed(std::string_view text) const {
    std::vector<double> acc(dim_, 0.0);
    size_t tokens = 0;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i == start) break;
        const auto& tv = token_vector(fnv1a(text.substr(start, i - start)));
        for (uint32_t d = 0; d < dim_; ++d) acc[d] += tv[d];
        ++tokens;
    }
    if (tokens == 0) {
        // empty text still embeds deterministically
        const auto& tv = token_vector(fnv1a(text));
        acc.assign(tv.begin(), tv.end());
    }
    double norm2 = 0.0;
    for (double x : acc) norm2 += x * x;
    if (norm2 < 1e-24) {
        // opposing tokens cancelled out; fall back to the whole-text vector
        const auto& tv = token_vector(fnv1a(text));
        acc.assign(tv.begin(), tv.end());
        norm2 = 1.0;
    }
    double inv = 1.0 / std::sqrt(norm2);
    std::vector<float> out(dim_);
    for (uint32_t d = 0; d < dim_; ++d) out[d] = static_cast<float>(acc[d] * inv);
    return out;
}

Pipeline::Pipeline(Store& store, VectorEngine& engine, LifecycleManager& lifecycle,
                   EligibilityPolicy& policy, const Embedder& embedder,
                   const RetrievalConfig& retrieval, const PipelineConfig& cfg, Clock& clock,
                   TelemetrySink* sink)
    : store_(store), engine_(engine), lifecycle_(lifecycle), policy_(policy),
      embedder_(embedder), retrieval_(retrieval), cfg_(cfg), clock_(clock), sink_(sink) {}

void Pipeline::emit(RequestRecord& rec) {
    if (sink_) sink_->write_line(format_request_line(rec));
}

ItemId Pipeline::write(const std::string& content, double label_value, double t_virtual,
                       uint64_t request_index, const std::string& namespace_tag) {
    auto start = std::chrono::steady_clock::now();
    RequestRecord rec;
    rec.ts_wall_us = wall_micros();
    rec.t_virtual = t_virtual;
    rec.request_index = request_index;
    rec.kind = RequestKind::Write;
    rec.policy = policy_.kind();

    auto t0 = std::chrono::steady_clock::now();
    std::vector<float> embedding = embedder_.embed(content);
    rec.phases.embed_us = elapsed_us(t0);

    ItemId id = store_.put(content, embedding, label_value, t_virtual, namespace_tag);
    engine_.index_vector(id, embedding);

    rec.latency_us = elapsed_us(start);
    emit(rec);
    return id;
}

RecallResult Pipeline::recall_inner(const AskRequest& req, uint32_t cap, bool /*defer_record*/) {
    RecallResult res;
    RequestRecord& rec = res.record;
    rec.ts_wall_us = wall_micros();
    rec.t_virtual = req.t_virtual;
    rec.request_index = req.request_index;
    rec.kind = req.kind;
    rec.policy = policy_.kind();

    auto t0 = std::chrono::steady_clock::now();
    std::vector<float> query = embedder_.embed(req.query_text);
    rec.phases.embed_us = elapsed_us(t0);

    t0 = std::chrono::steady_clock::now();
    res.candidates = policy_.build_candidates(req.t_virtual, req.request_index);
    rec.phases.candidates_us = elapsed_us(t0);
    rec.candidate_size = res.candidates.ids.size();
    rec.hot_count = res.candidates.hot_count;
    rec.warm_count = res.candidates.warm_count;

    t0 = std::chrono::steady_clock::now();
    if (!res.candidates.ids.empty()) {
        ScanResult scan = engine_.scan(query, res.candidates.ids, cap);
        res.hits = std::move(scan.hits);
        res.vectors_scanned = scan.vectors_scanned;
    }
    res.injected = store_.read_for_injection(res.hits);
    rec.phases.scan_us = elapsed_us(t0);

    rec.vectors_scanned = res.vectors_scanned;
    rec.injected_count = res.hits.size();
    rec.injected_ids.reserve(res.hits.size());
    rec.injected_sims.reserve(res.hits.size());
    rec.injected_labels.reserve(res.injected.size());
    for (const auto& h : res.hits) {
        rec.injected_ids.push_back(h.id);
        rec.injected_sims.push_back(h.similarity);
    }
    for (const auto& inj : res.injected) rec.injected_labels.push_back(inj.label_value);
    return res;
}

RecallResult Pipeline::recall(const AskRequest& req, uint32_t cap_override) {
    uint32_t cap = retrieval_.prompt_cap_n;
    if (cap_override != 0) {
        if (cap_override > retrieval_.prompt_cap_n) {
            throw Error(ErrorCode::CapExceeded,
                        "requested n exceeds the fixed prompt cap " +
                            std::to_string(retrieval_.prompt_cap_n));
        }
        cap = cap_override;
    }
    auto start = std::chrono::steady_clock::now();
    RequestPathGuard guard;
    RecallResult res = recall_inner(req, cap, false);

    auto t0 = std::chrono::steady_clock::now();
    std::vector<ItemId> selected;
    selected.reserve(res.hits.size());
    for (const auto& h : res.hits) selected.push_back(h.id);
    policy_.on_feedback(res.candidates, selected, req.t_virtual);
    res.record.phases.feedback_us = elapsed_us(t0);

    res.record.latency_us = elapsed_us(start);
    emit(res.record);
    return res;
}

std::string Pipeline::assemble_prompt(const AskRequest& req,
                                      const std::vector<InjectedRead>& injected) {
    std::string prompt;
    prompt.reserve(512 + injected.size() * 48);
    prompt += kSystemPrompt;
    prompt += '\n';
    {
        std::lock_guard lock(conv_mutex_);
        auto it = conversations_.find(req.namespace_tag);
        if (it != conversations_.end()) {
            for (const auto& turn : it->second) {
                prompt += "prior: ";
                prompt += turn;
                prompt += '\n';
            }
        }
    }
    prompt += "question: ";
    prompt += req.query_text;
    prompt += '\n';
    for (const auto& inj : injected) {
        prompt += "memory ";
        char idbuf[24];
        std::snprintf(idbuf, sizeof(idbuf), "%llu", static_cast<unsigned long long>(inj.id));
        prompt += idbuf;
        prompt += ": ";
        prompt += inj.content;
        prompt += '\n';
    }
    return prompt;
}

AskResult Pipeline::ask(const AskRequest& req) {
    auto start = std::chrono::steady_clock::now();
    RequestPathGuard guard;
    AskResult result;
    result.recall = recall_inner(req, retrieval_.prompt_cap_n, true);
    RequestRecord& rec = result.recall.record;

    auto t0 = std::chrono::steady_clock::now();
    std::string prompt = assemble_prompt(req, result.recall.injected);
    result.token_count = count_tokens(prompt);
    rec.token_count = result.token_count;
    rec.phases.assemble_us = elapsed_us(t0);

    // Mock answerer: a deterministic digest of the prompt referencing the
    // injected ids. Measured latency is real pipeline work unless the
    // synthetic per-token delay knob is turned on.
    t0 = std::chrono::steady_clock::now();
    std::string answer = "answer(";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(prompt)));
    answer += buf;
    answer += ") used ";
    std::snprintf(buf, sizeof(buf), "%zu", result.recall.injected.size());
    answer += buf;
    answer += " memories [";
    for (size_t i = 0; i < result.recall.injected.size(); ++i) {
        if (i) answer += ',';
        std::snprintf(buf, sizeof(buf), "%llu",
                      static_cast<unsigned long long>(result.recall.injected[i].id));
        answer += buf;
    }
    answer += ']';
    if (cfg_.answer_delay_us_per_token > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double, std::micro>(
            cfg_.answer_delay_us_per_token * static_cast<double>(result.token_count)));
    }
    result.answer = std::move(answer);
    for (const auto& inj : result.recall.injected) result.citations.push_back(inj.id);
    rec.phases.answer_us = elapsed_us(t0);

    t0 = std::chrono::steady_clock::now();
    std::vector<ItemId> selected;
    selected.reserve(result.recall.hits.size());
    for (const auto& h : result.recall.hits) selected.push_back(h.id);
    policy_.on_feedback(result.recall.candidates, selected, req.t_virtual);
    rec.phases.feedback_us = elapsed_us(t0);

    {
        std::lock_guard lock(conv_mutex_);
        auto& conv = conversations_[req.namespace_tag];
        conv.push_back(req.query_text);
        while (conv.size() > cfg_.conversation_turns) conv.pop_front();
    }

    rec.latency_us = elapsed_us(start);
    emit(rec);
    return result;
}

}  // namespace amvl
