#pragma once

#include <shared_mutex>
#include <mutex>
#include <span>
#include <vector>

#include "amvl/errors.hpp"
#include "amvl/types.hpp"

namespace amvl {

class Store;

// Exact cosine top-k over an explicit candidate allowlist. Vectors are
// unit-normalized at index time, so similarity is a plain dot product.
// Storage is one contiguous float array with tombstoned slots reused;
// scan cost is linear in the allowlist, never in the full store.
class VectorEngine {
public:
    explicit VectorEngine(uint32_t dim) : dim_(dim) {}

    void index_vector(ItemId id, std::span<const float> embedding);
    void remove_vector(ItemId id);
    bool contains(ItemId id) const;
    size_t size() const;

    // Top-k_out by (similarity desc, id asc) over allowlist ∩ indexed ids.
    // An empty allowlist yields empty hits with vectors_scanned = 0.
    ScanResult scan(std::span<const float> query, std::span<const ItemId> allowlist,
                    size_t k_out) const;

    // Re-index every non-evicted item (snapshot restore path).
    void rebuild_from(const Store& store);

    uint32_t dim() const { return dim_; }

private:
    uint32_t dim_;
    mutable std::shared_mutex mutex_;
    std::vector<float> slots_;           // slot s occupies [s*dim_, (s+1)*dim_)
    std::vector<ItemId> slot_owner_;     // 0 = tombstone
    std::vector<uint32_t> free_slots_;
    std::vector<int64_t> id_to_slot_;    // -1 = absent; index = id
};

}  // namespace amvl
