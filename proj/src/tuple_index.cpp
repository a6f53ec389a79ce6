#include "dacq/tuple_index.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

namespace dacq {

TupleIndex::TupleIndex(std::size_t width, std::size_t expected) : width_(width) {
    std::size_t cap = std::bit_ceil(std::max<std::size_t>(16, expected * 2 + 1));
    slots_.assign(cap, -1);
    keys_.reserve(expected * width);
}

std::uint64_t TupleIndex::hash(const std::uint32_t* key) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ width_;
    for (std::size_t i = 0; i < width_; ++i) {
        h ^= key[i] + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 0xff51afd7ed558ccdULL;
    }
    h ^= h >> 33;
    return h;
}

void TupleIndex::grow() {
    std::vector<std::int32_t> next(slots_.size() * 2, -1);
    std::size_t mask = next.size() - 1;
    for (std::uint32_t id = 0; id < count_; ++id) {
        std::size_t s = hash(keys_.data() + id * width_) & mask;
        while (next[s] >= 0) s = (s + 1) & mask;
        next[s] = static_cast<std::int32_t>(id);
    }
    slots_.swap(next);
}

std::pair<std::uint32_t, bool> TupleIndex::insert(const std::uint32_t* key) {
    if ((count_ + 1) * 2 > slots_.size()) grow();
    std::size_t mask = slots_.size() - 1;
    std::size_t s = hash(key) & mask;
    while (slots_[s] >= 0) {
        const std::uint32_t* other = keys_.data() + static_cast<std::size_t>(slots_[s]) * width_;
        if (width_ == 0 || std::memcmp(other, key, width_ * sizeof(std::uint32_t)) == 0)
            return {static_cast<std::uint32_t>(slots_[s]), false};
        s = (s + 1) & mask;
    }
    std::uint32_t id = static_cast<std::uint32_t>(count_++);
    keys_.insert(keys_.end(), key, key + width_);
    slots_[s] = static_cast<std::int32_t>(id);
    return {id, true};
}

std::int64_t TupleIndex::find(const std::uint32_t* key) const {
    std::size_t mask = slots_.size() - 1;
    std::size_t s = hash(key) & mask;
    while (slots_[s] >= 0) {
        const std::uint32_t* other = keys_.data() + static_cast<std::size_t>(slots_[s]) * width_;
        if (width_ == 0 || std::memcmp(other, key, width_ * sizeof(std::uint32_t)) == 0) return slots_[s];
        s = (s + 1) & mask;
    }
    return -1;
}

}  // namespace dacq
