#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "svit/config.hpp"
#include "svit/encoder.hpp"
#include "svit/mac_counter.hpp"
#include "svit/token_grid.hpp"
#include "svit/weights.hpp"

namespace svit {

enum class MaskMode { kCausal, kBidirectional };

// Which key frames s a query frame t may attend to (frames are 1-based).
// Causal: t−M < s ≤ t (no lower bound when M is unbounded).
// Bidirectional: every frame of the clip.
struct TemporalMask {
  MaskMode mode = MaskMode::kCausal;
  Capacity capacity;

  bool admits(std::size_t t, std::size_t s) const {
    if (mode == MaskMode::kBidirectional) return true;
    if (s > t) return false;
    return !capacity || t - s < *capacity;
  }
};

// Temporal cross-attention form used by the clip computation. kJoint lets
// every query token attend to every admitted memory token and feeds that one
// result to both plane output projections; it coincides with kT2D on a 1×1
// grid.
enum class CrossAttentionForm { kT2D, kJoint };

// Clip-level computation of the encoder: every layer is evaluated for all
// frames at once, with temporal attention over the mask-admitted frames'
// keys/values. Spatial attention follows the config's effective window. With a
// causal mask of capacity M this must reproduce streaming encode_sequence.
template <Real T>
std::vector<FrameFeatures<T>> clip_t2d_forward(std::span<const Tensor<T>> frames,
                                               const EncoderWeights<T>& weights,
                                               const ModelConfig& config,
                                               const TemporalMask& mask,
                                               MacCounter* counter = nullptr,
                                               CrossAttentionForm form = CrossAttentionForm::kT2D);

// Causal, unbounded clip computation with joint (unfactorised) temporal
// cross-attention. A cost and capacity reference, not an equivalence target.
template <Real T>
std::vector<TokenGrid<T>> full_joint_attention(std::span<const Tensor<T>> frames,
                                               const EncoderWeights<T>& weights,
                                               const ModelConfig& config,
                                               MacCounter* counter = nullptr);

// Single-query-frame cross-attention primitives over an explicit list of
// memory frames (oldest first). Used by the clip computation and by the MAC
// comparisons.
template <Real T>
TokenGrid<T> joint_cross_attention(const TokenGrid<T>& query,
                                   std::span<const TokenGrid<T>> keys,
                                   std::span<const TokenGrid<T>> values,
                                   std::size_t heads, MacCounter* counter = nullptr);

template <Real T>
TokenGrid<T> plane_cross_attention(const TokenGrid<T>& query,
                                   std::span<const TokenGrid<T>> keys,
                                   std::span<const TokenGrid<T>> values,
                                   std::size_t heads, bool rows,
                                   MacCounter* counter = nullptr);

}  // namespace svit
