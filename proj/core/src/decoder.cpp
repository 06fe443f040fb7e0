#include "svit/decoder.hpp"

#include <string>

#include "svit/attention.hpp"
#include "svit/kernels.hpp"

namespace svit {

template <Real T>
Tensor<T> pool_frames(std::span<const FrameFeatures<T>> features) {
  if (features.empty()) throw ConfigError("pool_frames: no frames");
  const std::size_t c = features[0].tokens.channels();
  Tensor<T> out({features.size(), c});
  for (std::size_t t = 0; t < features.size(); ++t) {
    const auto& tok = features[t].tokens.tokens();
    if (tok.dim(1) != c) throw DimensionError("pool_frames: channel width changes across frames");
    const std::size_t n = tok.dim(0);
    for (std::size_t j = 0; j < c; ++j) {
      T sum = 0;
      for (std::size_t i = 0; i < n; ++i) sum += tok[i * c + j];
      out[t * c + j] = sum / static_cast<T>(n);
    }
  }
  return out;
}

template <Real T>
Tensor<T> decode(const Tensor<T>& pooled, const DecoderWeights<T>& w,
                 MacCounter* counter) {
  if (pooled.rank() != 2 || pooled.dim(0) == 0) {
    throw DimensionError("decode expects [T×C] with T >= 1, got " +
                         shape_to_string(pooled.shape()));
  }
  const std::size_t frames = pooled.dim(0), c = pooled.dim(1);
  CostScope scope(counter, CostCategory::kDecoder);
  Tensor<T> x = pooled;
  if (w.pos_embed) {
    if (frames > w.pos_embed->dim(0)) {
      throw ConfigError("decoder position embedding covers " +
                        std::to_string(w.pos_embed->dim(0)) + " frames, got " +
                        std::to_string(frames));
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += (*w.pos_embed)[i];
  }
  for (const auto& layer : w.layers) {
    Tensor<T> h = layer_norm(x, layer.ln1_gamma, layer.ln1_beta);
    Tensor<T> a = scaled_dot_attention(matmul(h, layer.w_q, counter),
                                       matmul(h, layer.w_k, counter),
                                       matmul(h, layer.w_v, counter), layer.heads,
                                       counter);
    Tensor<T> y = add(matmul(a, layer.w_o, counter), x);
    x = add(mlp_forward(layer_norm(y, layer.ln2_gamma, layer.ln2_beta), layer.mlp, counter),
            y);
  }
  Tensor<T> mean({1, c});
  for (std::size_t j = 0; j < c; ++j) {
    T sum = 0;
    for (std::size_t t = 0; t < frames; ++t) sum += x[t * c + j];
    mean[j] = sum / static_cast<T>(frames);
  }
  Tensor<T> logits = matmul(mean, w.classifier, counter);
  return std::move(logits).reshaped({w.classifier.dim(1)});
}

template Tensor<float> pool_frames(std::span<const FrameFeatures<float>>);
template Tensor<double> pool_frames(std::span<const FrameFeatures<double>>);
template Tensor<float> decode(const Tensor<float>&, const DecoderWeights<float>&, MacCounter*);
template Tensor<double> decode(const Tensor<double>&, const DecoderWeights<double>&, MacCounter*);

}  // namespace svit
