#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "svit/token_grid.hpp"

namespace svit {

// Memory capacity in frames; nullopt is unbounded.
using Capacity = std::optional<std::size_t>;

// One frame's keys and values as produced by the self-attention projections.
// Entries are stop-gradient: gradients never flow back through them to the
// computation that produced them (see gradcheck.hpp).
template <Real T>
struct MemoryEntry {
  std::int64_t frame_index = 0;
  TokenGrid<T> keys;
  TokenGrid<T> values;
  bool detached = true;
};

// Immutable FIFO of the most recent `capacity` frames. pushed() returns a new
// pool that shares the surviving entries with this one.
template <Real T>
class MemoryPool {
 public:
  explicit MemoryPool(Capacity capacity = std::nullopt);

  Capacity capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Oldest first.
  const MemoryEntry<T>& entry(std::size_t i) const { return *entries_.at(i); }
  const MemoryEntry<T>& back() const { return *entries_.back(); }
  std::optional<std::int64_t> last_frame_index() const;

  [[nodiscard]] MemoryPool pushed(std::int64_t frame_index,
                                  const TokenGrid<T>& keys,
                                  const TokenGrid<T>& values) const;

  // Copy with entry i replaced; used by finite-difference probes of the
  // memory-path gradient.
  [[nodiscard]] MemoryPool with_entry(std::size_t i,
                                      MemoryEntry<T> replacement) const;

 private:
  Capacity capacity_;
  std::vector<std::shared_ptr<const MemoryEntry<T>>> entries_;
};

template <Real T>
MemoryPool<T> memory_push(const MemoryPool<T>& pool, std::int64_t frame_index,
                          const TokenGrid<T>& keys, const TokenGrid<T>& values) {
  return pool.pushed(frame_index, keys, values);
}

}  // namespace svit
