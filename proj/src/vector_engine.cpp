#include "amvl/vector_engine.hpp"

#include <algorithm>
#include <cmath>

#include "amvl/store.hpp"

namespace amvl {

void VectorEngine::index_vector(ItemId id, std::span<const float> embedding) {
    if (embedding.size() != dim_) {
        throw Error(ErrorCode::DimensionMismatch,
                    "expected " + std::to_string(dim_) + " dims, got " +
                        std::to_string(embedding.size()));
    }
    double norm2 = 0.0;
    for (float x : embedding) norm2 += static_cast<double>(x) * x;
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-4) {
        throw Error(ErrorCode::InvalidArgument, "vector is not unit norm");
    }

    std::unique_lock lock(mutex_);
    if (id < id_to_slot_.size() && id_to_slot_[id] >= 0) {
        throw Error(ErrorCode::DuplicateId, "id " + std::to_string(id) + " already indexed");
    }
    uint32_t slot;
    if (!free_slots_.empty()) {
        slot = free_slots_.back();
        free_slots_.pop_back();
    } else {
        slot = static_cast<uint32_t>(slot_owner_.size());
        slot_owner_.push_back(0);
        slots_.resize(static_cast<size_t>(slot + 1) * dim_);
    }
    std::copy(embedding.begin(), embedding.end(), slots_.begin() + static_cast<size_t>(slot) * dim_);
    slot_owner_[slot] = id;
    if (id >= id_to_slot_.size()) id_to_slot_.resize(id + 1, -1);
    id_to_slot_[id] = slot;
}

void VectorEngine::remove_vector(ItemId id) {
    std::unique_lock lock(mutex_);
    if (id >= id_to_slot_.size() || id_to_slot_[id] < 0) {
        throw Error(ErrorCode::NotFound, "id " + std::to_string(id) + " not indexed");
    }
    uint32_t slot = static_cast<uint32_t>(id_to_slot_[id]);
    slot_owner_[slot] = 0;
    free_slots_.push_back(slot);
    id_to_slot_[id] = -1;
}

bool VectorEngine::contains(ItemId id) const {
    std::shared_lock lock(mutex_);
    return id < id_to_slot_.size() && id_to_slot_[id] >= 0;
}

size_t VectorEngine::size() const {
    std::shared_lock lock(mutex_);
    return slot_owner_.size() - free_slots_.size();
}

ScanResult VectorEngine::scan(std::span<const float> query, std::span<const ItemId> allowlist,
                              size_t k_out) const {
    if (query.size() != dim_) {
        throw Error(ErrorCode::DimensionMismatch, "query dimension mismatch");
    }
    if (k_out < 1) {
        throw Error(ErrorCode::InvalidArgument, "k_out must be >= 1");
    }

    std::shared_lock lock(mutex_);
    ScanResult result;
    result.hits.reserve(std::min(k_out, allowlist.size()));

    std::vector<ScanHit> scored;
    scored.reserve(allowlist.size());
    const float* q = query.data();
    for (ItemId id : allowlist) {
        if (id >= id_to_slot_.size()) continue;
        int64_t s = id_to_slot_[id];
        if (s < 0) continue;
        const float* v = slots_.data() + static_cast<size_t>(s) * dim_;
        double dot = 0.0;
        for (uint32_t i = 0; i < dim_; ++i) {
            dot += static_cast<double>(q[i]) * v[i];
        }
        scored.push_back(ScanHit{id, dot});
    }
    result.vectors_scanned = scored.size();

    auto better = [](const ScanHit& a, const ScanHit& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.id < b.id;
    };
    size_t take = std::min(k_out, scored.size());
    if (take < scored.size()) {
        std::nth_element(scored.begin(), scored.begin() + take, scored.end(), better);
        scored.resize(take);
    }
    std::sort(scored.begin(), scored.end(), better);
    result.hits = std::move(scored);
    return result;
}

void VectorEngine::rebuild_from(const Store& store) {
    {
        std::unique_lock lock(mutex_);
        slots_.clear();
        slot_owner_.clear();
        free_slots_.clear();
        id_to_slot_.clear();
    }
    uint64_t n = store.total_puts();
    for (ItemId id = 1; id <= n; ++id) {
        if (!store.exists(id)) continue;
        MemoryItem item = store.get(id);
        index_vector(id, item.embedding);
    }
}

}  // namespace amvl
