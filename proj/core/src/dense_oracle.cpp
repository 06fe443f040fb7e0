#include "svit/dense_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svit/kernels.hpp"

// Everything below is rebuilt from tensor kernels only; nothing here calls
// into attention.cpp or encoder.cpp.

namespace svit {

namespace {

template <Real T>
Tensor<T> head_slice(const Tensor<T>& m, std::size_t head, std::size_t d) {
  const std::size_t n = m.dim(0), c = m.dim(1);
  Tensor<T> out({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = m[i * c + head * d + j];
  return out;
}

template <Real T>
Tensor<T> multi_head(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                     std::size_t heads, MacCounter* counter) {
  const std::size_t c = q.dim(1), d = c / heads, nq = q.dim(0);
  const T scale = T(1) / std::sqrt(static_cast<T>(d));
  Tensor<T> out({nq, c});
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor<T> logits = matmul(head_slice(q, h, d), transpose(head_slice(k, h, d)), counter);
    for (auto& x : logits.data()) x *= scale;
    Tensor<T> oh = matmul(softmax_rows(logits), head_slice(v, h, d), counter);
    for (std::size_t i = 0; i < nq; ++i)
      for (std::size_t j = 0; j < d; ++j) out[i * c + h * d + j] = oh[i * d + j];
  }
  return out;
}

template <Real T>
Tensor<T> embed(const Tensor<T>& frame, const EncoderWeights<T>& w,
                const ModelConfig& cfg, MacCounter* counter) {
  const std::size_t p = cfg.patch, gh = cfg.grid_h(), gw = cfg.grid_w();
  if (frame.shape() != Shape{3, cfg.image_h, cfg.image_w}) {
    throw DimensionError("clip frame " + shape_to_string(frame.shape()) +
                         " does not match configured image");
  }
  Tensor<T> patches({gh * gw, 3 * p * p});
  for (std::size_t tok = 0; tok < gh * gw; ++tok) {
    const std::size_t py = tok / gw, px = tok % gw;
    for (std::size_t f = 0; f < 3 * p * p; ++f) {
      const std::size_t c = f / (p * p), dy = (f / p) % p, dx = f % p;
      patches[tok * 3 * p * p + f] = frame.at(c, py * p + dy, px * p + dx);
    }
  }
  CostScope scope(counter, CostCategory::kPatchEmbed);
  return add(matmul(patches, w.patch_embed, counter), w.pos_embed);
}

template <Real T>
Tensor<T> mlp(const Tensor<T>& x, const MlpWeights<T>& w, MacCounter* counter) {
  Tensor<T> h = matmul(x, w.w1, counter);
  const std::size_t hd = w.b1.size(), c = w.b2.size();
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = gelu_scalar(h[i] + w.b1[i % hd]);
  Tensor<T> out = matmul(h, w.w2, counter);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += w.b2[i % c];
  return out;
}

// Layer norm over channels at every position of a [C×h×w] map.
template <Real T>
Tensor<T> norm_chw(const Tensor<T>& f, const Tensor<T>& gamma, const Tensor<T>& beta) {
  const std::size_t c = f.dim(0), hw = f.dim(1) * f.dim(2);
  Tensor<T> tokens({hw, c});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) tokens[i * c + ch] = f[ch * hw + i];
  Tensor<T> n = layer_norm(tokens, gamma, beta);
  Tensor<T> out(f.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) out[ch * hw + i] = n[i * c + ch];
  return out;
}

// Token matrix [N×C] of an h×w grid <-> map [C×h×w].
template <Real T>
Tensor<T> to_map(const Tensor<T>& tokens, std::size_t h, std::size_t w) {
  const std::size_t c = tokens.dim(1);
  Tensor<T> out({c, h, w});
  for (std::size_t i = 0; i < h * w; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) out[ch * h * w + i] = tokens[i * c + ch];
  return out;
}

template <Real T>
Tensor<T> to_tokens(const Tensor<T>& map) {
  const std::size_t c = map.dim(0), hw = map.dim(1) * map.dim(2);
  Tensor<T> out({hw, c});
  for (std::size_t i = 0; i < hw; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) out[i * c + ch] = map[ch * hw + i];
  return out;
}

template <Real T>
Tensor<T> block(const Tensor<T>& f, const ResNetBlockWeights<T>& w, MacCounter* counter) {
  CostScope scope(counter, CostCategory::kResNetBlocks);
  Tensor<T> h = conv2d(norm_chw(f, w.norm1_gamma, w.norm1_beta), w.conv1, 1, 1, counter);
  h = norm_chw(h, w.norm2_gamma, w.norm2_beta);
  for (auto& x : h.data()) x = gelu_scalar(x);
  Tensor<T> r = conv2d(h, w.conv2, 1, 1, counter);
  Tensor<T> out(f.shape());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i] + r[i];
  return out;
}

template <Real T>
Tensor<T> offset_keys(const Tensor<T>& keys, const EncoderWeights<T>& w,
                      std::size_t layer, std::size_t t, std::size_t s) {
  const auto& emb = w.layers[layer].attention.memory_offset_embedding;
  if (!emb) return keys;
  if (s > t || t - s >= emb->dim(0)) {
    throw ConfigError("clip computation: no offset embedding for frame offset " +
                      std::to_string(static_cast<long long>(t) - static_cast<long long>(s)));
  }
  Tensor<T> k = keys;
  const std::size_t c = k.dim(1);
  for (std::size_t i = 0; i < k.size(); ++i) k[i] += (*emb)[(t - s) * c + i % c];
  return k;
}

}  // namespace

template <Real T>
TokenGrid<T> plane_cross_attention(const TokenGrid<T>& query,
                                   std::span<const TokenGrid<T>> keys,
                                   std::span<const TokenGrid<T>> values,
                                   std::size_t heads, bool rows, MacCounter* counter) {
  if (keys.empty()) throw EmptyMemoryError("clip plane attention with no admitted frames");
  const std::size_t h = query.rows(), w = query.cols(), c = query.channels();
  const std::size_t lines = rows ? h : w, len = rows ? w : h;
  Tensor<T> out({h * w, c});
  for (std::size_t l = 0; l < lines; ++l) {
    auto token = [&](std::size_t j) { return rows ? l * w + j : j * w + l; };
    Tensor<T> q({len, c});
    Tensor<T> k({keys.size() * len, c}), v({keys.size() * len, c});
    for (std::size_t j = 0; j < len; ++j)
      for (std::size_t ch = 0; ch < c; ++ch) q[j * c + ch] = query.tokens()[token(j) * c + ch];
    for (std::size_t s = 0; s < keys.size(); ++s) {
      for (std::size_t j = 0; j < len; ++j) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          k[(s * len + j) * c + ch] = keys[s].tokens()[token(j) * c + ch];
          v[(s * len + j) * c + ch] = values[s].tokens()[token(j) * c + ch];
        }
      }
    }
    Tensor<T> o = multi_head(q, k, v, heads, counter);
    for (std::size_t j = 0; j < len; ++j)
      for (std::size_t ch = 0; ch < c; ++ch) out[token(j) * c + ch] = o[j * c + ch];
  }
  return TokenGrid<T>(h, w, std::move(out));
}

template <Real T>
TokenGrid<T> joint_cross_attention(const TokenGrid<T>& query,
                                   std::span<const TokenGrid<T>> keys,
                                   std::span<const TokenGrid<T>> values,
                                   std::size_t heads, MacCounter* counter) {
  if (keys.empty()) throw EmptyMemoryError("joint attention with no admitted frames");
  const std::size_t n = query.count(), c = query.channels();
  Tensor<T> k({keys.size() * n, c}), v({keys.size() * n, c});
  for (std::size_t s = 0; s < keys.size(); ++s) {
    for (std::size_t i = 0; i < n * c; ++i) {
      k[s * n * c + i] = keys[s].tokens()[i];
      v[s * n * c + i] = values[s].tokens()[i];
    }
  }
  return TokenGrid<T>(query.rows(), query.cols(),
                      multi_head(query.tokens(), k, v, heads, counter));
}

template <Real T>
std::vector<FrameFeatures<T>> clip_t2d_forward(std::span<const Tensor<T>> frames,
                                               const EncoderWeights<T>& weights,
                                               const ModelConfig& cfg,
                                               const TemporalMask& mask,
                                               MacCounter* counter,
                                               CrossAttentionForm form) {
  cfg.validate();
  if (frames.empty()) throw ConfigError("clip computation needs at least one frame");
  const std::size_t nt = frames.size(), gh = cfg.grid_h(), gw = cfg.grid_w();
  const std::size_t c = cfg.channels;
  const auto win = cfg.effective_window();
  const auto tiles = win ? window_partition(gh, gw, *win)
                         : std::vector<std::vector<std::size_t>>{};

  std::vector<Tensor<T>> z(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    FrameScope fs(counter, t);
    z[t] = embed(frames[t], weights, cfg, counter);
  }

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto& lw = weights.layers[l];
    const auto& aw = lw.attention;
    std::vector<Tensor<T>> spatial(nt), q_tilde(nt);
    std::vector<TokenGrid<T>> keys(nt), values(nt);
    for (std::size_t t = 0; t < nt; ++t) {
      FrameScope fs(counter, t);
      Tensor<T> xn = layer_norm(z[t], lw.ln1_gamma, lw.ln1_beta);
      {
        CostScope cs(counter, CostCategory::kSpatialAttention);
        Tensor<T> q = matmul(xn, aw.w_q, counter);
        Tensor<T> k = matmul(xn, aw.w_k, counter);
        Tensor<T> v = matmul(xn, aw.w_v, counter);
        Tensor<T> attended;
        if (tiles.empty()) {
          attended = multi_head(q, k, v, aw.heads, counter);
        } else {
          attended = Tensor<T>(q.shape());
          for (const auto& tile : tiles) {
            Tensor<T> a = multi_head(gather_rows(q, tile), gather_rows(k, tile),
                                     gather_rows(v, tile), aw.heads, counter);
            for (std::size_t i = 0; i < tile.size(); ++i)
              std::copy_n(&a[i * c], c, &attended[tile[i] * c]);
          }
        }
        spatial[t] = matmul(attended, aw.w_o, counter);
        keys[t] = TokenGrid<T>(gh, gw, std::move(k));
        values[t] = TokenGrid<T>(gh, gw, std::move(v));
      }
      CostScope cs(counter, CostCategory::kTemporalProjection);
      q_tilde[t] = matmul(spatial[t], aw.w_tq, counter);
    }
    for (std::size_t t = 0; t < nt; ++t) {
      FrameScope fs(counter, t);
      std::vector<TokenGrid<T>> mk, mv;
      for (std::size_t s = 0; s < nt; ++s) {
        if (!mask.admits(t + 1, s + 1)) continue;
        mk.emplace_back(gh, gw, offset_keys(keys[s].tokens(), weights, l, t, s));
        mv.push_back(values[s]);
      }
      TokenGrid<T> q(gh, gw, q_tilde[t]);
      TokenGrid<T> xt_raw, ty_raw;
      {
        CostScope cs(counter, CostCategory::kTemporalCrossAttention);
        if (form == CrossAttentionForm::kT2D) {
          xt_raw = plane_cross_attention<T>(q, mk, mv, aw.heads, true, counter);
          ty_raw = plane_cross_attention<T>(q, mk, mv, aw.heads, false, counter);
        } else {
          xt_raw = joint_cross_attention<T>(q, mk, mv, aw.heads, counter);
          ty_raw = xt_raw;
        }
      }
      Tensor<T> xt, ty;
      {
        CostScope cs(counter, CostCategory::kTemporalProjection);
        xt = matmul(xt_raw.tokens(), aw.w_to_xt, counter);
        ty = matmul(ty_raw.tokens(), aw.w_to_ty, counter);
      }
      Tensor<T> y(z[t].shape());
      for (std::size_t i = 0; i < y.size(); ++i) {
        const T fused = spatial[t][i] + aw.alpha_xt[i % c] * xt[i] + aw.alpha_ty[i % c] * ty[i];
        y[i] = fused + z[t][i];
      }
      CostScope cs(counter, CostCategory::kMlp);
      Tensor<T> m = mlp(layer_norm(y, lw.ln2_gamma, lw.ln2_beta), lw.mlp, counter);
      for (std::size_t i = 0; i < y.size(); ++i) z[t][i] = m[i] + y[i];
    }
    if (cfg.mode == TaskMode::kFrame && cfg.is_stage_end(l)) {
      for (std::size_t t = 0; t < nt; ++t) {
        FrameScope fs(counter, t);
        z[t] = to_tokens(block(to_map(z[t], gh, gw), weights.blocks[l / cfg.layers_per_stage()],
                               counter));
      }
    }
  }

  std::vector<FrameFeatures<T>> out(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    if (cfg.mode == TaskMode::kFrame) {
      FrameScope fs(counter, t);
      CostScope cs(counter, CostCategory::kAdaptor);
      const Tensor<T> f = to_map(z[t], gh, gw);
      const auto& ad = *weights.adaptor;
      FeaturePyramid<T> p;
      p.levels[0] = conv2d_transpose(f, ad.up4, 4, counter);
      p.levels[1] = conv2d_transpose(f, ad.up2, 2, counter);
      p.levels[2] = conv2d(f, ad.lateral, 1, 0, counter);
      p.levels[3] = conv2d(f, ad.down, 2, 0, counter);
      out[t].pyramid = std::move(p);
    }
    out[t].tokens = TokenGrid<T>(gh, gw, std::move(z[t]));
  }
  return out;
}

template <Real T>
std::vector<TokenGrid<T>> full_joint_attention(std::span<const Tensor<T>> frames,
                                               const EncoderWeights<T>& weights,
                                               const ModelConfig& config,
                                               MacCounter* counter) {
  auto feats = clip_t2d_forward(frames, weights, config,
                                TemporalMask{MaskMode::kCausal, std::nullopt}, counter,
                                CrossAttentionForm::kJoint);
  std::vector<TokenGrid<T>> out;
  out.reserve(feats.size());
  for (auto& f : feats) out.push_back(std::move(f.tokens));
  return out;
}

#define SVIT_INSTANTIATE_ORACLE(T)                                                   \
  template std::vector<FrameFeatures<T>> clip_t2d_forward(                           \
      std::span<const Tensor<T>>, const EncoderWeights<T>&, const ModelConfig&,      \
      const TemporalMask&, MacCounter*, CrossAttentionForm);                         \
  template std::vector<TokenGrid<T>> full_joint_attention(                           \
      std::span<const Tensor<T>>, const EncoderWeights<T>&, const ModelConfig&,      \
      MacCounter*);                                                                  \
  template TokenGrid<T> joint_cross_attention(const TokenGrid<T>&,                   \
                                              std::span<const TokenGrid<T>>,         \
                                              std::span<const TokenGrid<T>>,         \
                                              std::size_t, MacCounter*);             \
  template TokenGrid<T> plane_cross_attention(const TokenGrid<T>&,                   \
                                              std::span<const TokenGrid<T>>,         \
                                              std::span<const TokenGrid<T>>,         \
                                              std::size_t, bool, MacCounter*);

SVIT_INSTANTIATE_ORACLE(float)
SVIT_INSTANTIATE_ORACLE(double)

#undef SVIT_INSTANTIATE_ORACLE

}  // namespace svit
