#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace svit {

// Where a multiply-accumulate is charged. Only matmul and convolution kernels
// add to the counter; softmax, normalization, activations and elementwise
// fusion are not MACs.
enum class CostCategory : std::size_t {
  kPatchEmbed,
  kSpatialAttention,
  kTemporalProjection,
  kTemporalCrossAttention,
  kMlp,
  kResNetBlocks,
  kAdaptor,
  kDecoder,
  kOther,
};

inline constexpr std::size_t kCostCategoryCount = 9;

std::string_view cost_category_name(CostCategory c);

// Counts scalar multiply-accumulates, bucketed by category and (optionally)
// by frame. Single-threaded; one counter per counting scope.
class MacCounter {
 public:
  bool enabled = true;

  void add(std::uint64_t n) {
    if (!enabled) return;
    total_ += n;
    by_category_[static_cast<std::size_t>(category_)] += n;
    if (frame_) {
      if (by_frame_.size() <= *frame_) by_frame_.resize(*frame_ + 1, 0);
      by_frame_[*frame_] += n;
    }
  }

  std::uint64_t macs() const { return total_; }
  std::uint64_t macs(CostCategory c) const {
    return by_category_[static_cast<std::size_t>(c)];
  }
  const std::array<std::uint64_t, kCostCategoryCount>& by_category() const {
    return by_category_;
  }
  // Per-frame totals, indexed by zero-based frame position. MACs charged
  // while no frame is active (e.g. the decoder) are not included.
  const std::vector<std::uint64_t>& by_frame() const { return by_frame_; }

  CostCategory category() const { return category_; }
  void set_category(CostCategory c) { category_ = c; }
  std::optional<std::size_t> frame() const { return frame_; }
  void set_frame(std::optional<std::size_t> f) { frame_ = f; }

  void reset() { *this = MacCounter{}; }

 private:
  std::uint64_t total_ = 0;
  std::array<std::uint64_t, kCostCategoryCount> by_category_{};
  std::vector<std::uint64_t> by_frame_;
  CostCategory category_ = CostCategory::kOther;
  std::optional<std::size_t> frame_;
};

// Sets the counter's category for the lifetime of the scope. Null-safe.
class CostScope {
 public:
  CostScope(MacCounter* counter, CostCategory c) : counter_(counter) {
    if (counter_) {
      saved_ = counter_->category();
      counter_->set_category(c);
    }
  }
  ~CostScope() {
    if (counter_) counter_->set_category(saved_);
  }
  CostScope(const CostScope&) = delete;
  CostScope& operator=(const CostScope&) = delete;

 private:
  MacCounter* counter_;
  CostCategory saved_ = CostCategory::kOther;
};

class FrameScope {
 public:
  FrameScope(MacCounter* counter, std::size_t frame) : counter_(counter) {
    if (counter_) {
      saved_ = counter_->frame();
      counter_->set_frame(frame);
    }
  }
  ~FrameScope() {
    if (counter_) counter_->set_frame(saved_);
  }
  FrameScope(const FrameScope&) = delete;
  FrameScope& operator=(const FrameScope&) = delete;

 private:
  MacCounter* counter_;
  std::optional<std::size_t> saved_;
};

}  // namespace svit
