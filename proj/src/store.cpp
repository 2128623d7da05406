#include "amvl/store.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "amvl/value_model.hpp"

namespace amvl {

using nlohmann::json;

namespace {

thread_local int g_request_path_depth = 0;

void append_raw(std::string& buf, const void* p, size_t n) {
    buf.append(static_cast<const char*>(p), n);
}

template <typename T>
void append_pod(std::string& buf, T v) {
    append_raw(buf, &v, sizeof(v));
}

class ByteReader {
public:
    ByteReader(const char* data, size_t size) : data_(data), size_(size) {}

    template <typename T>
    T read() {
        if (pos_ + sizeof(T) > size_) {
            throw Error(ErrorCode::CorruptSnapshot, "truncated record");
        }
        T v;
        std::memcpy(&v, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string read_string(size_t n) {
        if (pos_ + n > size_) {
            throw Error(ErrorCode::CorruptSnapshot, "truncated string");
        }
        std::string s(data_ + pos_, n);
        pos_ += n;
        return s;
    }

    size_t remaining() const { return size_ - pos_; }

private:
    const char* data_;
    size_t size_;
    size_t pos_ = 0;
};

constexpr char kSnapshotMagic[8] = {'A', 'M', 'V', 'L', 'S', 'N', 'P', '1'};

}  // namespace

RequestPathGuard::RequestPathGuard() { ++g_request_path_depth; }
RequestPathGuard::~RequestPathGuard() { --g_request_path_depth; }
bool RequestPathGuard::active() { return g_request_path_depth > 0; }

Store::Store(const StoreConfig& cfg, uint32_t embedding_dim, PolicyKind active_policy,
             const ValueParams& params, const LifecycleThresholds& thresholds)
    : cfg_(cfg), dim_(embedding_dim), policy_(active_policy), params_(params),
      thresholds_(thresholds) {
    if (!cfg_.wal_path.empty()) {
        wal_.open(cfg_.wal_path, std::ios::app);
        if (!wal_) throw Error(ErrorCode::IoError, "cannot open WAL " + cfg_.wal_path);
    }
}

Store::~Store() = default;

MemoryItem& Store::slot(ItemId id) {
    return const_cast<MemoryItem&>(static_cast<const Store*>(this)->slot(id));
}

const MemoryItem& Store::slot(ItemId id) const {
    if (id == 0 || id > items_.size()) {
        throw Error(ErrorCode::NotFound, "item " + std::to_string(id));
    }
    return items_[id - 1];
}

void Store::require_live(ItemId id) const {
    if (slot(id).evicted) {
        throw Error(ErrorCode::Evicted, "item " + std::to_string(id));
    }
}

void Store::wal_append(const std::string& line) {
    if (wal_.is_open()) {
        wal_ << line << '\n';
        wal_.flush();
    }
}

ItemId Store::put(std::string content, std::vector<float> embedding, double label_value, double t,
                  std::string namespace_tag) {
    if (embedding.size() != dim_) {
        throw Error(ErrorCode::DimensionMismatch,
                    "expected " + std::to_string(dim_) + " dims, got " +
                        std::to_string(embedding.size()));
    }
    double norm2 = 0.0;
    for (float x : embedding) norm2 += static_cast<double>(x) * x;
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-4) {
        throw Error(ErrorCode::InvalidArgument, "embedding is not unit norm");
    }

    std::unique_lock lock(mutex_);
    if (cfg_.max_items != 0 && items_.size() >= cfg_.max_items) {
        throw Error(ErrorCode::StorageFull, "max_items = " + std::to_string(cfg_.max_items));
    }
    ItemId id = items_.size() + 1;
    MemoryItem item;
    item.id = id;
    item.namespace_tag = std::move(namespace_tag);
    item.content = std::move(content);
    item.embedding = std::move(embedding);
    item.value = params_.v_init;
    item.t_last = t;
    item.t_created = t;
    item.label_value = label_value;
    item.tier = initial_tier_for(params_.v_init);
    items_.push_back(std::move(item));
    ++stored_;
    tiers_[static_cast<int>(items_.back().tier)].insert(id);
    if (policy_ == PolicyKind::TTL) ttl_queue_.push_back(id);
    if (policy_ == PolicyKind::LRU) {
        lru_list_.push_front(id);
        lru_pos_[id] = lru_list_.begin();
    }

    if (wal_.is_open()) {
        const MemoryItem& it = items_.back();
        json rec{{"op", "put"},
                 {"id", id},
                 {"ns", it.namespace_tag},
                 {"content", it.content},
                 {"label", it.label_value},
                 {"t", t},
                 {"value", it.value},
                 {"tier", tier_name(it.tier)},
                 {"embedding", it.embedding}};
        wal_append(rec.dump());
    }
    return id;
}

Tier Store::initial_tier_for(double v) const { return initial_tier(v, thresholds_); }

MemoryItem Store::get(ItemId id) const {
    std::shared_lock lock(mutex_);
    require_live(id);
    return slot(id);
}

bool Store::exists(ItemId id) const {
    std::shared_lock lock(mutex_);
    return id >= 1 && id <= items_.size() && !slot(id).evicted;
}

void Store::set_tier_locked(ItemId id, Tier to) {
    MemoryItem& item = slot(id);
    if (item.tier == to) return;
    tiers_[static_cast<int>(item.tier)].erase(id);
    tiers_[static_cast<int>(to)].insert(id);
    item.tier = to;
    ++migration_count_;
    if (RequestPathGuard::active()) {
        rp_migrations_.fetch_add(1, std::memory_order_relaxed);
    }
}

MemoryItem Store::update_item_atomic(ItemId id, const UpdateDelta& delta) {
    std::unique_lock lock(mutex_);
    require_live(id);
    MemoryItem& item = slot(id);
    if (delta.value) item.value = *delta.value;
    if (delta.t_last) item.t_last = *delta.t_last;
    if (delta.t_last_access) {
        item.t_last_access = *delta.t_last_access;
        item.accessed = true;
    }
    if (delta.tier) set_tier_locked(id, *delta.tier);

    if (wal_.is_open()) {
        json rec{{"op", "update"}, {"id", id}};
        if (delta.value) rec["value"] = *delta.value;
        if (delta.t_last) rec["t_last"] = *delta.t_last;
        if (delta.t_last_access) rec["t_last_access"] = *delta.t_last_access;
        if (delta.tier) rec["tier"] = tier_name(*delta.tier);
        wal_append(rec.dump());
    }
    return item;
}

void Store::update_values(std::span<const ItemId> ids,
                          const std::function<std::optional<ValueWrite>(const MemoryItem&)>& fn) {
    std::unique_lock lock(mutex_);
    for (ItemId id : ids) {
        if (id == 0 || id > items_.size()) continue;
        MemoryItem& item = items_[id - 1];
        if (item.evicted) continue;
        auto w = fn(item);
        if (!w) continue;
        item.value = w->value;
        item.t_last = w->t_last;
        if (w->touch_access) {
            item.t_last_access = w->t_last;
            item.accessed = true;
        }
        if (wal_.is_open()) {
            json rec{{"op", "update"}, {"id", id}, {"value", item.value}, {"t_last", item.t_last}};
            if (w->touch_access) rec["t_last_access"] = item.t_last_access;
            wal_append(rec.dump());
        }
    }
}

Tier Store::set_tier(ItemId id, Tier to) {
    std::unique_lock lock(mutex_);
    require_live(id);
    Tier from = slot(id).tier;
    set_tier_locked(id, to);
    if (from != to && wal_.is_open()) {
        json rec{{"op", "update"}, {"id", id}, {"tier", tier_name(to)}};
        wal_append(rec.dump());
    }
    return from;
}

void Store::evict(ItemId id) {
    std::unique_lock lock(mutex_);
    require_live(id);
    MemoryItem& item = slot(id);
    if (policy_ == PolicyKind::AMVL && item.tier != Tier::Cold) {
        throw Error(ErrorCode::InvalidArgument,
                    "eviction applies only to cold items under the value policy");
    }
    tiers_[static_cast<int>(item.tier)].erase(id);
    if (policy_ == PolicyKind::TTL && !ttl_queue_.empty()) {
        if (ttl_queue_.front() == id) {
            ttl_queue_.pop_front();
        } else {
            auto it = std::find(ttl_queue_.begin(), ttl_queue_.end(), id);
            if (it != ttl_queue_.end()) ttl_queue_.erase(it);
        }
    }
    if (policy_ == PolicyKind::LRU) {
        auto it = lru_pos_.find(id);
        if (it != lru_pos_.end()) {
            lru_list_.erase(it->second);
            lru_pos_.erase(it);
        }
    }
    item.evicted = true;
    item.content.clear();
    item.content.shrink_to_fit();
    item.embedding.clear();
    item.embedding.shrink_to_fit();
    --stored_;
    ++eviction_count_;
    if (RequestPathGuard::active()) {
        rp_evictions_.fetch_add(1, std::memory_order_relaxed);
    }
    if (wal_.is_open()) {
        json rec{{"op", "evict"}, {"id", id}};
        wal_append(rec.dump());
    }
}

void Store::append_hot_ids(std::vector<ItemId>& out) const {
    std::shared_lock lock(mutex_);
    const auto& hot = tiers_[static_cast<int>(Tier::Hot)].ids();
    out.insert(out.end(), hot.begin(), hot.end());
}

void Store::sample_warm_random(size_t k, DetRng& rng, std::vector<ItemId>& out) const {
    std::shared_lock lock(mutex_);
    const auto& warm = tiers_[static_cast<int>(Tier::Warm)];
    size_t m = warm.size();
    if (m == 0 || k == 0) return;
    if (k >= m) {
        const auto& ids = warm.ids();
        out.insert(out.end(), ids.begin(), ids.end());
        return;
    }
    // Floyd's algorithm: k distinct indices from [0, m) in O(k) draws.
    std::vector<size_t> chosen;
    chosen.reserve(k);
    for (size_t j = m - k; j < m; ++j) {
        size_t t = static_cast<size_t>(rng.next_below(j + 1));
        bool seen = std::find(chosen.begin(), chosen.end(), t) != chosen.end();
        chosen.push_back(seen ? j : t);
    }
    for (size_t idx : chosen) out.push_back(warm.at(idx));
}

void Store::sample_warm_recent(size_t k, std::vector<ItemId>& out) const {
    std::shared_lock lock(mutex_);
    const auto& warm = tiers_[static_cast<int>(Tier::Warm)].ids();
    if (warm.empty() || k == 0) return;
    // last-use time with fallback to creation time
    auto key = [&](ItemId id) {
        const MemoryItem& it = items_[id - 1];
        return it.accessed ? it.t_last_access : it.t_created;
    };
    std::vector<ItemId> sorted(warm);
    size_t take = std::min(k, sorted.size());
    std::partial_sort(sorted.begin(), sorted.begin() + take, sorted.end(),
                      [&](ItemId a, ItemId b) {
                          double ka = key(a), kb = key(b);
                          if (ka != kb) return ka > kb;
                          return a < b;
                      });
    out.insert(out.end(), sorted.begin(), sorted.begin() + take);
}

std::vector<ItemId> Store::append_ttl_live(double t_now, double window,
                                           std::vector<ItemId>& out) const {
    std::shared_lock lock(mutex_);
    std::vector<ItemId> expired;
    // creation order == expiry order, so expired ids form a prefix
    size_t i = 0;
    for (; i < ttl_queue_.size(); ++i) {
        ItemId id = ttl_queue_[i];
        if (t_now - items_[id - 1].t_created < window) break;
        expired.push_back(id);
    }
    for (; i < ttl_queue_.size(); ++i) out.push_back(ttl_queue_[i]);
    return expired;
}

std::vector<ItemId> Store::ttl_expired_prefix(double t_now, double window) const {
    std::shared_lock lock(mutex_);
    std::vector<ItemId> expired;
    for (ItemId id : ttl_queue_) {
        if (t_now - items_[id - 1].t_created < window) break;
        expired.push_back(id);
    }
    return expired;
}

void Store::append_lru_front(size_t capacity, std::vector<ItemId>& out) const {
    std::shared_lock lock(mutex_);
    size_t n = 0;
    for (auto it = lru_list_.begin(); it != lru_list_.end() && n < capacity; ++it, ++n) {
        out.push_back(*it);
    }
}

void Store::lru_refresh(std::span<const ItemId> ids, double t_now) {
    std::unique_lock lock(mutex_);
    for (ItemId id : ids) {
        auto it = lru_pos_.find(id);
        if (it == lru_pos_.end()) continue;
        lru_list_.splice(lru_list_.begin(), lru_list_, it->second);
        MemoryItem& item = items_[id - 1];
        item.t_last_access = t_now;
        item.accessed = true;
    }
}

std::vector<InjectedRead> Store::read_for_injection(std::span<const ScanHit> hits) const {
    std::shared_lock lock(mutex_);
    std::vector<InjectedRead> out;
    out.reserve(hits.size());
    for (const auto& hit : hits) {
        if (hit.id == 0 || hit.id > items_.size()) continue;
        const MemoryItem& item = items_[hit.id - 1];
        if (item.evicted) continue;
        out.push_back(InjectedRead{item.id, item.label_value, item.content});
    }
    return out;
}

ItemId Store::collect_sweep_batch(ItemId cursor, size_t batch, std::vector<ItemId>& out) const {
    std::shared_lock lock(mutex_);
    size_t n = items_.size();
    if (n == 0 || batch == 0) return cursor;
    ItemId id = cursor;
    for (size_t step = 0; step < n && out.size() < batch; ++step) {
        id = (id % n) + 1;  // 1..n, wrapping
        if (!items_[id - 1].evicted) out.push_back(id);
    }
    return id;
}

size_t Store::tier_size(Tier t) const {
    std::shared_lock lock(mutex_);
    return tiers_[static_cast<int>(t)].size();
}

std::vector<ItemId> Store::tier_ids_snapshot(Tier t) const {
    std::shared_lock lock(mutex_);
    return tiers_[static_cast<int>(t)].ids();
}

size_t Store::stored_count() const {
    std::shared_lock lock(mutex_);
    return stored_;
}

uint64_t Store::total_puts() const {
    std::shared_lock lock(mutex_);
    return items_.size();
}

StoreStats Store::stats() const {
    std::shared_lock lock(mutex_);
    StoreStats s;
    s.total_puts = items_.size();
    s.evictions = eviction_count_;
    s.tier_migrations = migration_count_;
    s.stored = stored_;
    s.hot = tiers_[0].size();
    s.warm = tiers_[1].size();
    s.cold = tiers_[2].size();
    return s;
}

bool Store::check_partition() const {
    std::shared_lock lock(mutex_);
    size_t live = 0;
    for (const auto& item : items_) {
        if (item.evicted) {
            for (const auto& set : tiers_) {
                if (set.contains(item.id)) return false;
            }
            continue;
        }
        ++live;
        int memberships = 0;
        for (int t = 0; t < 3; ++t) {
            if (tiers_[t].contains(item.id)) ++memberships;
        }
        if (memberships != 1) return false;
        if (!tiers_[static_cast<int>(item.tier)].contains(item.id)) return false;
    }
    return live == stored_ && tiers_[0].size() + tiers_[1].size() + tiers_[2].size() == stored_;
}

RequestPathViolations Store::request_path_violations() const {
    RequestPathViolations v;
    v.tier_migrations = rp_migrations_.load(std::memory_order_relaxed);
    v.evictions = rp_evictions_.load(std::memory_order_relaxed);
    v.sweep_batches = rp_sweep_batches_.load(std::memory_order_relaxed);
    return v;
}

void Store::count_sweep_batch_on_request_path() {
    if (RequestPathGuard::active()) {
        rp_sweep_batches_.fetch_add(1, std::memory_order_relaxed);
    }
}

void Store::snapshot(const std::string& path) const {
    std::shared_lock lock(mutex_);
    std::string buf;
    buf.reserve(items_.size() * 128 + 64);
    append_raw(buf, kSnapshotMagic, sizeof(kSnapshotMagic));
    append_pod<uint32_t>(buf, 1);  // version
    append_pod<uint32_t>(buf, dim_);
    append_pod<uint64_t>(buf, items_.size());
    for (const auto& item : items_) {
        append_pod<uint64_t>(buf, item.id);
        append_pod<uint8_t>(buf, item.evicted ? 1 : 0);
        if (item.evicted) continue;
        append_pod<uint16_t>(buf, static_cast<uint16_t>(item.namespace_tag.size()));
        append_raw(buf, item.namespace_tag.data(), item.namespace_tag.size());
        append_pod<uint32_t>(buf, static_cast<uint32_t>(item.content.size()));
        append_raw(buf, item.content.data(), item.content.size());
        append_raw(buf, item.embedding.data(), item.embedding.size() * sizeof(float));
        append_pod<double>(buf, item.value);
        append_pod<double>(buf, item.t_last);
        append_pod<double>(buf, item.t_created);
        append_pod<double>(buf, item.t_last_access);
        append_pod<uint8_t>(buf, item.accessed ? 1 : 0);
        append_pod<uint8_t>(buf, static_cast<uint8_t>(item.tier));
        append_pod<double>(buf, item.label_value);
    }
    append_pod<uint8_t>(buf, policy_ == PolicyKind::LRU ? 1 : 0);
    if (policy_ == PolicyKind::LRU) {
        append_pod<uint64_t>(buf, lru_list_.size());
        for (ItemId id : lru_list_) append_pod<uint64_t>(buf, id);
    }
    uint64_t checksum = fnv1a(std::string_view(buf));
    append_pod<uint64_t>(buf, checksum);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write snapshot " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

std::unique_ptr<Store> Store::restore(const std::string& path, const StoreConfig& cfg,
                                      PolicyKind active_policy, const ValueParams& params,
                                      const LifecycleThresholds& thresholds) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open snapshot " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < sizeof(kSnapshotMagic) + 8) {
        throw Error(ErrorCode::CorruptSnapshot, "file too small");
    }
    uint64_t stored_checksum;
    std::memcpy(&stored_checksum, buf.data() + buf.size() - 8, 8);
    std::string_view payload(buf.data(), buf.size() - 8);
    if (fnv1a(payload) != stored_checksum) {
        throw Error(ErrorCode::CorruptSnapshot, "checksum mismatch");
    }

    ByteReader r(payload.data(), payload.size());
    std::string magic = r.read_string(sizeof(kSnapshotMagic));
    if (std::memcmp(magic.data(), kSnapshotMagic, sizeof(kSnapshotMagic)) != 0) {
        throw Error(ErrorCode::CorruptSnapshot, "bad magic");
    }
    uint32_t version = r.read<uint32_t>();
    if (version != 1) throw Error(ErrorCode::CorruptSnapshot, "unsupported version");
    uint32_t dim = r.read<uint32_t>();
    uint64_t count = r.read<uint64_t>();

    auto store = std::make_unique<Store>(cfg, dim, active_policy, params, thresholds);
    for (uint64_t i = 0; i < count; ++i) {
        MemoryItem item;
        item.id = r.read<uint64_t>();
        if (item.id != i + 1) throw Error(ErrorCode::CorruptSnapshot, "non-dense ids");
        item.evicted = r.read<uint8_t>() != 0;
        if (!item.evicted) {
            uint16_t ns_len = r.read<uint16_t>();
            item.namespace_tag = r.read_string(ns_len);
            uint32_t content_len = r.read<uint32_t>();
            item.content = r.read_string(content_len);
            item.embedding.resize(dim);
            std::string emb = r.read_string(static_cast<size_t>(dim) * sizeof(float));
            std::memcpy(item.embedding.data(), emb.data(), emb.size());
            item.value = r.read<double>();
            item.t_last = r.read<double>();
            item.t_created = r.read<double>();
            item.t_last_access = r.read<double>();
            item.accessed = r.read<uint8_t>() != 0;
            item.tier = static_cast<Tier>(r.read<uint8_t>());
            item.label_value = r.read<double>();
        }
        store->items_.push_back(std::move(item));
        MemoryItem& placed = store->items_.back();
        if (!placed.evicted) {
            ++store->stored_;
            store->tiers_[static_cast<int>(placed.tier)].insert(placed.id);
            if (active_policy == PolicyKind::TTL) store->ttl_queue_.push_back(placed.id);
        }
    }
    uint8_t has_lru = r.read<uint8_t>();
    if (has_lru) {
        uint64_t lru_count = r.read<uint64_t>();
        for (uint64_t i = 0; i < lru_count; ++i) {
            ItemId id = r.read<uint64_t>();
            if (active_policy == PolicyKind::LRU) {
                store->lru_list_.push_back(id);
                store->lru_pos_[id] = std::prev(store->lru_list_.end());
            }
        }
    } else if (active_policy == PolicyKind::LRU) {
        // no persisted order: most recent access/creation first
        std::vector<ItemId> ids;
        for (const auto& item : store->items_) {
            if (!item.evicted) ids.push_back(item.id);
        }
        std::sort(ids.begin(), ids.end(), [&](ItemId a, ItemId b) {
            const auto& ia = store->items_[a - 1];
            const auto& ib = store->items_[b - 1];
            double ka = ia.accessed ? ia.t_last_access : ia.t_created;
            double kb = ib.accessed ? ib.t_last_access : ib.t_created;
            if (ka != kb) return ka > kb;
            return a > b;
        });
        for (ItemId id : ids) {
            store->lru_list_.push_back(id);
            store->lru_pos_[id] = std::prev(store->lru_list_.end());
        }
    }
    return store;
}

void Store::replay_wal(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open WAL " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception&) {
            throw Error(ErrorCode::ParseError, "WAL line " + std::to_string(line_no));
        }
        std::string op = rec.value("op", "");
        if (op == "put") {
            std::vector<float> emb = rec.at("embedding").get<std::vector<float>>();
            ItemId id = put(rec.at("content").get<std::string>(), std::move(emb),
                            rec.at("label").get<double>(), rec.at("t").get<double>(),
                            rec.value("ns", "default"));
            if (id != rec.at("id").get<ItemId>()) {
                throw Error(ErrorCode::ParseError,
                            "WAL id mismatch at line " + std::to_string(line_no));
            }
        } else if (op == "update") {
            UpdateDelta d;
            if (rec.contains("value")) d.value = rec["value"].get<double>();
            if (rec.contains("t_last")) d.t_last = rec["t_last"].get<double>();
            if (rec.contains("t_last_access")) d.t_last_access = rec["t_last_access"].get<double>();
            if (rec.contains("tier")) {
                std::string t = rec["tier"].get<std::string>();
                d.tier = t == "hot" ? Tier::Hot : t == "warm" ? Tier::Warm : Tier::Cold;
            }
            update_item_atomic(rec.at("id").get<ItemId>(), d);
        } else if (op == "evict") {
            evict(rec.at("id").get<ItemId>());
        } else {
            throw Error(ErrorCode::SchemaError, "unknown WAL op at line " + std::to_string(line_no));
        }
    }
}

}  // namespace amvl
