#include "svit/encoder.hpp"

#include <string>

#include "svit/kernels.hpp"

namespace svit {

template <Real T>
EncoderState<T>::EncoderState(ModelConfig config,
                              std::shared_ptr<const EncoderWeights<T>> weights,
                              EncoderOptions options)
    : config_(std::move(config)), weights_(std::move(weights)), options_(options) {
  config_.validate();
  if (!weights_ || weights_->layers.size() != config_.layers) {
    throw ConfigError("encoder weights do not match the configured layer count");
  }
  for (const auto& layer : weights_->layers) layer.attention.validate();
  reset();
}

template <Real T>
void EncoderState<T>::reset() {
  pools_.assign(config_.layers, MemoryPool<T>(config_.memory_capacity));
  next_frame_index_ = 1;
}

template <Real T>
TokenGrid<T> patch_embed(const Tensor<T>& frame, const EncoderWeights<T>& weights,
                         const ModelConfig& config, MacCounter* counter) {
  if (frame.shape() != Shape{3, config.image_h, config.image_w}) {
    throw DimensionError("frame " + shape_to_string(frame.shape()) +
                         " does not match configured image " +
                         shape_to_string({3, config.image_h, config.image_w}));
  }
  const std::size_t p = config.patch, gh = config.grid_h(), gw = config.grid_w();
  Tensor<T> patches({gh * gw, 3 * p * p});
  for (std::size_t py = 0; py < gh; ++py) {
    for (std::size_t px = 0; px < gw; ++px) {
      T* row = patches.data().data() + (py * gw + px) * 3 * p * p;
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t dy = 0; dy < p; ++dy)
          for (std::size_t dx = 0; dx < p; ++dx)
            *row++ = frame.at(c, py * p + dy, px * p + dx);
    }
  }
  CostScope scope(counter, CostCategory::kPatchEmbed);
  return TokenGrid<T>(gh, gw, add(matmul(patches, weights.patch_embed, counter),
                                  weights.pos_embed));
}

template <Real T>
Tensor<T> mlp_forward(const Tensor<T>& x, const MlpWeights<T>& w, MacCounter* counter) {
  Tensor<T> h = gelu(add_row_bias(matmul(x, w.w1, counter), w.b1));
  return add_row_bias(matmul(h, w.w2, counter), w.b2);
}

namespace {

template <Real T>
TokenGrid<T> mlp_residual(const TokenGrid<T>& y, const LayerWeights<T>& w,
                          MacCounter* counter) {
  CostScope scope(counter, CostCategory::kMlp);
  Tensor<T> m = mlp_forward(layer_norm(y.tokens(), w.ln2_gamma, w.ln2_beta), w.mlp, counter);
  return TokenGrid<T>(y.rows(), y.cols(), add(m, y.tokens()));
}

template <Real T>
Tensor<T> channel_norm(const Tensor<T>& chw, const Tensor<T>& gamma,
                       const Tensor<T>& beta) {
  return hwc_to_chw(layer_norm(chw_to_hwc(chw), gamma, beta));
}

template <Real T>
TokenGrid<T> stage_block(const TokenGrid<T>& z, const ResNetBlockWeights<T>& w,
                         MacCounter* counter) {
  return TokenGrid<T>::from_hwc(chw_to_hwc(resnet_block(hwc_to_chw(z.hwc()), w, counter)));
}

}  // namespace

template <Real T>
TokenGrid<T> transformer_layer(const TokenGrid<T>& z, std::size_t layer_index,
                               EncoderState<T>& state, MacCounter* counter) {
  if (layer_index >= state.config_.layers) {
    throw ConfigError("layer index " + std::to_string(layer_index) + " out of range");
  }
  const auto& w = state.weights().layers[layer_index];
  TokenGrid<T> normed(z.rows(), z.cols(),
                      layer_norm(z.tokens(), w.ln1_gamma, w.ln1_beta));
  StreamingOptions opts{state.config_.effective_window(),
                        state.options_.skip_memory_push};
  auto attn = streaming_t2d_attention(normed, state.pools_[layer_index], w.attention,
                                      state.next_frame_index_, opts, counter);
  state.pools_[layer_index] = std::move(attn.pool);
  TokenGrid<T> y(z.rows(), z.cols(), add(attn.output.tokens(), z.tokens()));
  return mlp_residual(y, w, counter);
}

template <Real T>
Tensor<T> resnet_block(const Tensor<T>& f, const ResNetBlockWeights<T>& w,
                       MacCounter* counter) {
  CostScope scope(counter, CostCategory::kResNetBlocks);
  Tensor<T> h = conv2d(channel_norm(f, w.norm1_gamma, w.norm1_beta), w.conv1, 1, 1, counter);
  h = gelu(channel_norm(h, w.norm2_gamma, w.norm2_beta));
  return add(f, conv2d(h, w.conv2, 1, 1, counter));
}

template <Real T>
FeaturePyramid<T> resolution_adaptor(const Tensor<T>& f16, const AdaptorWeights<T>& w,
                                     MacCounter* counter) {
  if (f16.rank() != 3 || f16.dim(1) % 2 || f16.dim(2) % 2) {
    throw ConfigError("resolution adaptor needs an even [C×h×w] map, got " +
                      shape_to_string(f16.shape()));
  }
  CostScope scope(counter, CostCategory::kAdaptor);
  FeaturePyramid<T> p;
  p.levels[0] = conv2d_transpose(f16, w.up4, 4, counter);
  p.levels[1] = conv2d_transpose(f16, w.up2, 2, counter);
  p.levels[2] = conv2d(f16, w.lateral, 1, 0, counter);
  p.levels[3] = conv2d(f16, w.down, 2, 0, counter);
  return p;
}

template <Real T>
FrameFeatures<T> encode_frame(EncoderState<T>& state, const Tensor<T>& frame,
                              MacCounter* counter) {
  const auto& cfg = state.config_;
  const auto& weights = state.weights();
  TokenGrid<T> z = patch_embed(frame, weights, cfg, counter);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    z = transformer_layer(z, l, state, counter);
    if (cfg.mode == TaskMode::kFrame && cfg.is_stage_end(l)) {
      z = stage_block(z, weights.blocks[l / cfg.layers_per_stage()], counter);
    }
  }
  FrameFeatures<T> out;
  if (cfg.mode == TaskMode::kFrame) {
    out.pyramid = resolution_adaptor(hwc_to_chw(z.hwc()), *weights.adaptor, counter);
  }
  out.tokens = std::move(z);
  ++state.next_frame_index_;
  return out;
}

template <Real T>
std::vector<FrameFeatures<T>> encode_sequence(EncoderState<T>& state,
                                              std::span<const Tensor<T>> frames,
                                              MacCounter* counter) {
  if (frames.empty()) throw ConfigError("encode_sequence: empty frame list");
  std::vector<FrameFeatures<T>> out;
  out.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].shape() != frames[0].shape()) {
      throw DimensionError("encode_sequence: frame " + std::to_string(t + 1) +
                           " has shape " + shape_to_string(frames[t].shape()) +
                           ", expected " + shape_to_string(frames[0].shape()));
    }
    FrameScope scope(counter, t);
    out.push_back(encode_frame(state, frames[t], counter));
  }
  return out;
}

template <Real T>
FrameFeatures<T> image_vit_forward(const EncoderWeights<T>& weights,
                                   const ModelConfig& cfg, const Tensor<T>& frame,
                                   MacCounter* counter) {
  TokenGrid<T> z = patch_embed(frame, weights, cfg, counter);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto& w = weights.layers[l];
    TokenGrid<T> normed(z.rows(), z.cols(),
                        layer_norm(z.tokens(), w.ln1_gamma, w.ln1_beta));
    auto attn = spatial_self_attention(normed, w.attention, cfg.effective_window(), counter);
    TokenGrid<T> y(z.rows(), z.cols(), add(attn.output.tokens(), z.tokens()));
    z = mlp_residual(y, w, counter);
    if (cfg.mode == TaskMode::kFrame && cfg.is_stage_end(l)) {
      z = stage_block(z, weights.blocks[l / cfg.layers_per_stage()], counter);
    }
  }
  FrameFeatures<T> out;
  if (cfg.mode == TaskMode::kFrame) {
    out.pyramid = resolution_adaptor(hwc_to_chw(z.hwc()), *weights.adaptor, counter);
  }
  out.tokens = std::move(z);
  return out;
}

#define SVIT_INSTANTIATE_ENCODER(T)                                              \
  template class EncoderState<T>;                                                \
  template TokenGrid<T> patch_embed(const Tensor<T>&, const EncoderWeights<T>&,  \
                                    const ModelConfig&, MacCounter*);            \
  template Tensor<T> mlp_forward(const Tensor<T>&, const MlpWeights<T>&,         \
                                 MacCounter*);                                   \
  template TokenGrid<T> transformer_layer(const TokenGrid<T>&, std::size_t,      \
                                          EncoderState<T>&, MacCounter*);        \
  template Tensor<T> resnet_block(const Tensor<T>&, const ResNetBlockWeights<T>&, \
                                  MacCounter*);                                  \
  template FeaturePyramid<T> resolution_adaptor(const Tensor<T>&,                \
                                                const AdaptorWeights<T>&,        \
                                                MacCounter*);                    \
  template FrameFeatures<T> encode_frame(EncoderState<T>&, const Tensor<T>&,     \
                                         MacCounter*);                           \
  template std::vector<FrameFeatures<T>> encode_sequence(                        \
      EncoderState<T>&, std::span<const Tensor<T>>, MacCounter*);                \
  template FrameFeatures<T> image_vit_forward(const EncoderWeights<T>&,          \
                                              const ModelConfig&,                \
                                              const Tensor<T>&, MacCounter*);

SVIT_INSTANTIATE_ENCODER(float)
SVIT_INSTANTIATE_ENCODER(double)

#undef SVIT_INSTANTIATE_ENCODER

}  // namespace svit
