#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "svit/attention.hpp"
#include "svit/config.hpp"
#include "svit/mac_counter.hpp"
#include "svit/memory_pool.hpp"
#include "svit/token_grid.hpp"
#include "svit/weights.hpp"

namespace svit {

inline constexpr std::array<std::size_t, 4> kPyramidStrides{4, 8, 16, 32};

// Four maps [C_s×h_s×w_s]. Strides are nominal, relative to a stride-16
// token grid: level s has (16/s)× the token grid's spatial size.
template <Real T>
struct FeaturePyramid {
  std::array<Tensor<T>, 4> levels;
};

template <Real T>
struct FrameFeatures {
  TokenGrid<T> tokens;                        // final-layer tokens
  std::optional<FeaturePyramid<T>> pyramid;   // frame mode only
};

struct EncoderOptions {
  // Test hook forwarded to StreamingOptions::skip_memory_push.
  bool skip_memory_push = false;
};

// Per-sequence streaming state: immutable weights plus one memory pool per
// layer. Not thread-safe; use one state per sequence.
template <Real T>
class EncoderState {
 public:
  EncoderState(ModelConfig config, std::shared_ptr<const EncoderWeights<T>> weights,
               EncoderOptions options = {});

  const ModelConfig& config() const { return config_; }
  const EncoderWeights<T>& weights() const { return *weights_; }
  std::shared_ptr<const EncoderWeights<T>> shared_weights() const { return weights_; }
  const std::vector<MemoryPool<T>>& pools() const { return pools_; }
  std::int64_t next_frame_index() const { return next_frame_index_; }
  const EncoderOptions& options() const { return options_; }

  // Drops all memory and restarts frame numbering at 1.
  void reset();

 private:
  template <Real U>
  friend TokenGrid<U> transformer_layer(const TokenGrid<U>&, std::size_t,
                                        EncoderState<U>&, MacCounter*);
  template <Real U>
  friend FrameFeatures<U> encode_frame(EncoderState<U>&, const Tensor<U>&,
                                       MacCounter*);

  ModelConfig config_;
  std::shared_ptr<const EncoderWeights<T>> weights_;
  EncoderOptions options_;
  std::vector<MemoryPool<T>> pools_;
  std::int64_t next_frame_index_ = 1;
};

// Non-overlapping patches of frame[3×H×W] projected to C, plus the positional
// embedding.
template <Real T>
TokenGrid<T> patch_embed(const Tensor<T>& frame, const EncoderWeights<T>& weights,
                         const ModelConfig& config, MacCounter* counter = nullptr);

template <Real T>
Tensor<T> mlp_forward(const Tensor<T>& x, const MlpWeights<T>& w,
                      MacCounter* counter = nullptr);

// Y = StreamingT2D(LN(Z)) + Z; Z' = MLP(LN(Y)) + Y. Advances the layer's pool
// with the frame numbered state.next_frame_index().
template <Real T>
TokenGrid<T> transformer_layer(const TokenGrid<T>& z, std::size_t layer_index,
                               EncoderState<T>& state, MacCounter* counter = nullptr);

template <Real T>
Tensor<T> resnet_block(const Tensor<T>& f, const ResNetBlockWeights<T>& w,
                       MacCounter* counter = nullptr);

template <Real T>
FeaturePyramid<T> resolution_adaptor(const Tensor<T>& f16, const AdaptorWeights<T>& w,
                                     MacCounter* counter = nullptr);

template <Real T>
FrameFeatures<T> encode_frame(EncoderState<T>& state, const Tensor<T>& frame,
                              MacCounter* counter = nullptr);

template <Real T>
std::vector<FrameFeatures<T>> encode_sequence(EncoderState<T>& state,
                                              std::span<const Tensor<T>> frames,
                                              MacCounter* counter = nullptr);

// The same network with every temporal branch removed: a plain (windowed)
// image ViT applied to one frame.
template <Real T>
FrameFeatures<T> image_vit_forward(const EncoderWeights<T>& weights,
                                   const ModelConfig& config, const Tensor<T>& frame,
                                   MacCounter* counter = nullptr);

}  // namespace svit
