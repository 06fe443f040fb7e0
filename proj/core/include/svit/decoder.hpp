#pragma once

#include <span>

#include "svit/encoder.hpp"
#include "svit/mac_counter.hpp"
#include "svit/tensor.hpp"
#include "svit/weights.hpp"

namespace svit {

// Spatial mean of each frame's final token grid: [T×C].
template <Real T>
Tensor<T> pool_frames(std::span<const FrameFeatures<T>> features);

// Bidirectional temporal Transformer over the T pooled tokens (optional
// learned temporal position embedding), temporal mean, linear classifier.
// Returns [num_classes] logits.
template <Real T>
Tensor<T> decode(const Tensor<T>& pooled, const DecoderWeights<T>& w,
                 MacCounter* counter = nullptr);

}  // namespace svit
