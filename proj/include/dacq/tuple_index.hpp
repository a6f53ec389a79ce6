#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dacq {

/// Open-addressing map from fixed-width tuples of 32-bit cells to dense ids.
class TupleIndex {
public:
    explicit TupleIndex(std::size_t width, std::size_t expected = 0);

    std::size_t width() const { return width_; }
    std::size_t size() const { return count_; }

    /// Returns (id, inserted).
    std::pair<std::uint32_t, bool> insert(const std::uint32_t* key);
    /// Returns -1 when absent.
    std::int64_t find(const std::uint32_t* key) const;
    std::span<const std::uint32_t> key(std::uint32_t id) const { return {keys_.data() + id * width_, width_}; }

private:
    std::uint64_t hash(const std::uint32_t* key) const;
    void grow();

    std::size_t width_;
    std::size_t count_ = 0;
    std::vector<std::uint32_t> keys_;
    std::vector<std::int32_t> slots_;
};

}  // namespace dacq
