#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "svit/config.hpp"
#include "svit/mac_counter.hpp"

namespace svit {

// frame: image backbone per frame, no temporal path.
// streaming: causal memory of min(t, M) frames at frame t.
// clip: every frame attends to all T frames (bidirectional).
enum class FlopMode { kFrame, kStreaming, kClip };

std::string_view to_string(FlopMode mode);

// Non-MAC work, as element counts (closed form only).
struct ElementCounts {
  std::uint64_t softmax = 0;     // logits normalised
  std::uint64_t layer_norm = 0;  // elements normalised
  std::uint64_t activation = 0;  // GELU evaluations
};

struct FlopReport {
  FlopMode mode = FlopMode::kFrame;
  std::size_t frames = 0;
  std::array<std::uint64_t, kCostCategoryCount> by_category{};
  std::vector<std::uint64_t> per_frame;  // encoder MACs of each frame
  ElementCounts elements;                // zero for instrumented reports

  std::uint64_t total() const;
  std::uint64_t macs(CostCategory c) const {
    return by_category[static_cast<std::size_t>(c)];
  }
};

// Temporal cross-attention MACs (logits + aggregation) of one query frame
// over `memory_frames` frames: 2·(h·w² + w·h²)·T_mem·C for T2D planes and
// 2·(h·w)²·T_mem·C for joint attention.
std::uint64_t t2d_cross_attention_macs(std::size_t grid_h, std::size_t grid_w,
                                       std::size_t channels, std::size_t memory_frames);
std::uint64_t joint_cross_attention_macs(std::size_t grid_h, std::size_t grid_w,
                                         std::size_t channels, std::size_t memory_frames);

// Memory frames visible to frame t (1-based) of a T-frame clip.
std::size_t memory_frames_at(std::size_t t, std::size_t frames, Capacity capacity,
                             FlopMode mode);

FlopReport closed_form_flops(const ModelConfig& config, std::size_t frames, FlopMode mode);

// Runs the real computation (encoder for frame/streaming, the clip oracle
// for clip mode, plus the decoder in sequence mode) on seeded noise with a
// MacCounter attached.
FlopReport instrumented_flops(const ModelConfig& config, std::size_t frames,
                              FlopMode mode, std::uint64_t seed = 0);

// Aligned table followed by a `key=value` block.
std::string format_flop_report(const FlopReport& report);

}  // namespace svit
