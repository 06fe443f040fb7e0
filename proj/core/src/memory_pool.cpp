#include "svit/memory_pool.hpp"

#include <string>

namespace svit {

template <Real T>
MemoryPool<T>::MemoryPool(Capacity capacity) : capacity_(capacity) {
  if (capacity_ && *capacity_ == 0) {
    throw ConfigError("memory capacity must be at least 1 frame");
  }
}

template <Real T>
std::optional<std::int64_t> MemoryPool<T>::last_frame_index() const {
  if (entries_.empty()) return std::nullopt;
  return entries_.back()->frame_index;
}

template <Real T>
MemoryPool<T> MemoryPool<T>::pushed(std::int64_t frame_index,
                                    const TokenGrid<T>& keys,
                                    const TokenGrid<T>& values) const {
  if (auto last = last_frame_index(); last && frame_index <= *last) {
    throw OrderingError("memory push of frame " + std::to_string(frame_index) +
                        " after frame " + std::to_string(*last));
  }
  if (!keys.same_layout(values)) {
    throw DimensionError("memory push: keys and values differ in layout");
  }
  if (!entries_.empty() && !entries_.back()->keys.same_layout(keys)) {
    throw DimensionError("memory push: grid " + std::to_string(keys.rows()) +
                         "x" + std::to_string(keys.cols()) +
                         " does not match stored grid");
  }
  MemoryPool next(*this);
  next.entries_.push_back(std::make_shared<const MemoryEntry<T>>(
      MemoryEntry<T>{frame_index, keys, values, true}));
  if (capacity_ && next.entries_.size() > *capacity_) {
    next.entries_.erase(next.entries_.begin(),
                        next.entries_.end() - static_cast<std::ptrdiff_t>(*capacity_));
  }
  return next;
}

template <Real T>
MemoryPool<T> MemoryPool<T>::with_entry(std::size_t i,
                                        MemoryEntry<T> replacement) const {
  MemoryPool next(*this);
  next.entries_.at(i) =
      std::make_shared<const MemoryEntry<T>>(std::move(replacement));
  return next;
}

template class MemoryPool<float>;
template class MemoryPool<double>;

}  // namespace svit
