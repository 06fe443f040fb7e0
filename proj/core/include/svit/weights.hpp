#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "svit/attention.hpp"
#include "svit/config.hpp"
#include "svit/tensor.hpp"

namespace svit {

template <Real T>
struct MlpWeights {
  Tensor<T> w1;  // [C×H]
  Tensor<T> b1;  // [H]
  Tensor<T> w2;  // [H×C]
  Tensor<T> b2;  // [C]
};

template <Real T>
struct LayerWeights {
  Tensor<T> ln1_gamma, ln1_beta;
  AttentionWeights<T> attention;
  Tensor<T> ln2_gamma, ln2_beta;
  MlpWeights<T> mlp;
};

// Cross-window propagation block: F + conv2(act(norm2(conv1(norm1(F))))),
// 3×3 convolutions without bias, norms are per-position layer norms over
// channels.
template <Real T>
struct ResNetBlockWeights {
  Tensor<T> norm1_gamma, norm1_beta;
  Tensor<T> conv1;  // [C×C×3×3]
  Tensor<T> norm2_gamma, norm2_beta;
  Tensor<T> conv2;  // [C×C×3×3]
};

template <Real T>
struct AdaptorWeights {
  Tensor<T> up4;      // [C×C4×8×8], transposed conv, stride 4
  Tensor<T> up2;      // [C×C8×4×4], transposed conv, stride 2
  Tensor<T> lateral;  // [C16×C×1×1]
  Tensor<T> down;     // [C32×C×2×2], stride 2
};

template <Real T>
struct EncoderWeights {
  Tensor<T> patch_embed;  // [3·p²×C], patch features ordered (channel, dy, dx)
  Tensor<T> pos_embed;    // [N×C]
  std::vector<LayerWeights<T>> layers;
  std::vector<ResNetBlockWeights<T>> blocks;  // one per stage, frame mode only
  std::optional<AdaptorWeights<T>> adaptor;   // frame mode only

  // Sets every fusion gate to `value`.
  void set_fusion_gates(T value);
};

template <Real T>
struct DecoderLayerWeights {
  Tensor<T> ln1_gamma, ln1_beta;
  Tensor<T> w_q, w_k, w_v, w_o;
  std::size_t heads = 1;
  Tensor<T> ln2_gamma, ln2_beta;
  MlpWeights<T> mlp;
};

template <Real T>
struct DecoderWeights {
  std::vector<DecoderLayerWeights<T>> layers;
  std::optional<Tensor<T>> pos_embed;  // [max_frames×C]
  Tensor<T> classifier;                // [C×num_classes]
};

// Seeded initialisation: matrices and kernels ~ U(−a, a) with a = √(1/fan_in),
// positional embeddings ~ U(−0.02, 0.02), norms γ=1 β=0, biases 0, fusion
// gates = config.fusion_init. Draw order is fixed, so a seed fully determines
// the weights.
template <Real T>
EncoderWeights<T> init_encoder_weights(const ModelConfig& config,
                                       std::uint64_t seed);

template <Real T>
DecoderWeights<T> init_decoder_weights(const ModelConfig& config,
                                       std::uint64_t seed);

}  // namespace svit
