#include "svit/weights.hpp"

#include <cmath>

#include "svit/rng.hpp"

namespace svit {

namespace {

template <Real T>
Tensor<T> uniform(Rng& rng, Shape shape, double bound) {
  Tensor<T> t(std::move(shape));
  for (auto& x : t.data()) x = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <Real T>
Tensor<T> fan_in_uniform(Rng& rng, Shape shape, std::size_t fan_in) {
  return uniform<T>(rng, std::move(shape), std::sqrt(1.0 / static_cast<double>(fan_in)));
}

template <Real T>
Tensor<T> ones(std::size_t n) {
  return Tensor<T>::filled({n}, T(1));
}

template <Real T>
MlpWeights<T> init_mlp(Rng& rng, std::size_t c, std::size_t hidden) {
  MlpWeights<T> m;
  m.w1 = fan_in_uniform<T>(rng, {c, hidden}, c);
  m.b1 = Tensor<T>({hidden});
  m.w2 = fan_in_uniform<T>(rng, {hidden, c}, hidden);
  m.b2 = Tensor<T>({c});
  return m;
}

}  // namespace

template <Real T>
void EncoderWeights<T>::set_fusion_gates(T value) {
  for (auto& layer : layers) {
    layer.attention.alpha_xt.fill(value);
    layer.attention.alpha_ty.fill(value);
  }
}

template <Real T>
EncoderWeights<T> init_encoder_weights(const ModelConfig& config,
                                       std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t c = config.channels;
  const std::size_t patch_dim = 3 * config.patch * config.patch;

  EncoderWeights<T> w;
  w.patch_embed = fan_in_uniform<T>(rng, {patch_dim, c}, patch_dim);
  w.pos_embed = uniform<T>(rng, {config.tokens(), c}, 0.02);

  for (std::size_t l = 0; l < config.layers; ++l) {
    LayerWeights<T> layer;
    layer.ln1_gamma = ones<T>(c);
    layer.ln1_beta = Tensor<T>({c});
    auto& a = layer.attention;
    a.heads = config.heads;
    a.w_q = fan_in_uniform<T>(rng, {c, c}, c);
    a.w_k = fan_in_uniform<T>(rng, {c, c}, c);
    a.w_v = fan_in_uniform<T>(rng, {c, c}, c);
    a.w_o = fan_in_uniform<T>(rng, {c, c}, c);
    a.w_tq = fan_in_uniform<T>(rng, {c, c}, c);
    a.w_to_xt = fan_in_uniform<T>(rng, {c, c}, c);
    a.w_to_ty = fan_in_uniform<T>(rng, {c, c}, c);
    a.alpha_xt = Tensor<T>::filled({c}, static_cast<T>(config.fusion_init));
    a.alpha_ty = Tensor<T>::filled({c}, static_cast<T>(config.fusion_init));
    if (config.memory_offset_embedding) {
      a.memory_offset_embedding = uniform<T>(rng, {*config.memory_capacity, c}, 0.02);
    }
    layer.ln2_gamma = ones<T>(c);
    layer.ln2_beta = Tensor<T>({c});
    layer.mlp = init_mlp<T>(rng, c, config.mlp_hidden());
    w.layers.push_back(std::move(layer));
  }

  if (config.mode == TaskMode::kFrame) {
    for (std::size_t s = 0; s < config.stages; ++s) {
      ResNetBlockWeights<T> b;
      b.norm1_gamma = ones<T>(c);
      b.norm1_beta = Tensor<T>({c});
      b.conv1 = fan_in_uniform<T>(rng, {c, c, 3, 3}, c * 9);
      b.norm2_gamma = ones<T>(c);
      b.norm2_beta = Tensor<T>({c});
      b.conv2 = fan_in_uniform<T>(rng, {c, c, 3, 3}, c * 9);
      w.blocks.push_back(std::move(b));
    }
    const auto& ac = config.adaptor_channels;
    AdaptorWeights<T> ad;
    ad.up4 = fan_in_uniform<T>(rng, {c, ac[0], 8, 8}, c * 64);
    ad.up2 = fan_in_uniform<T>(rng, {c, ac[1], 4, 4}, c * 16);
    ad.lateral = fan_in_uniform<T>(rng, {ac[2], c, 1, 1}, c);
    ad.down = fan_in_uniform<T>(rng, {ac[3], c, 2, 2}, c * 4);
    w.adaptor = std::move(ad);
  }
  return w;
}

template <Real T>
DecoderWeights<T> init_decoder_weights(const ModelConfig& config,
                                       std::uint64_t seed) {
  config.validate();
  Rng rng(seed ^ 0x5eed'dec0'de00'0001ULL);
  const std::size_t c = config.channels;
  DecoderWeights<T> w;
  for (std::size_t l = 0; l < config.decoder_layers; ++l) {
    DecoderLayerWeights<T> layer;
    layer.heads = config.heads;
    layer.ln1_gamma = ones<T>(c);
    layer.ln1_beta = Tensor<T>({c});
    layer.w_q = fan_in_uniform<T>(rng, {c, c}, c);
    layer.w_k = fan_in_uniform<T>(rng, {c, c}, c);
    layer.w_v = fan_in_uniform<T>(rng, {c, c}, c);
    layer.w_o = fan_in_uniform<T>(rng, {c, c}, c);
    layer.ln2_gamma = ones<T>(c);
    layer.ln2_beta = Tensor<T>({c});
    layer.mlp = init_mlp<T>(rng, c, config.mlp_hidden());
    w.layers.push_back(std::move(layer));
  }
  if (config.decoder_pos_embedding) {
    w.pos_embed = uniform<T>(rng, {config.decoder_max_frames, c}, 0.02);
  }
  w.classifier = fan_in_uniform<T>(rng, {c, config.num_classes}, c);
  return w;
}

template struct EncoderWeights<float>;
template struct EncoderWeights<double>;
template EncoderWeights<float> init_encoder_weights(const ModelConfig&, std::uint64_t);
template EncoderWeights<double> init_encoder_weights(const ModelConfig&, std::uint64_t);
template DecoderWeights<float> init_decoder_weights(const ModelConfig&, std::uint64_t);
template DecoderWeights<double> init_decoder_weights(const ModelConfig&, std::uint64_t);

}  // namespace svit
