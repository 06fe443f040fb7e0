#include "svit/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "svit/kernels.hpp"

namespace svit {

namespace {

template <Real T>
void require_square(const Tensor<T>& m, std::size_t c, const char* name) {
  if (m.shape() != Shape{c, c}) {
    throw DimensionError(std::string("attention weight ") + name + " is " +
                         shape_to_string(m.shape()) + ", expected " +
                         shape_to_string({c, c}));
  }
}

// Keys of one pool entry, shifted by the offset embedding when present.
template <Real T>
Tensor<T> entry_keys(const MemoryPool<T>& pool, std::size_t i,
                     const Tensor<T>* offset_embedding) {
  const auto& e = pool.entry(i);
  if (!offset_embedding) return e.keys.tokens();
  const auto offset =
      static_cast<std::size_t>(pool.back().frame_index - e.frame_index);
  if (offset >= offset_embedding->dim(0)) {
    throw ConfigError("memory offset " + std::to_string(offset) +
                      " exceeds offset embedding length " +
                      std::to_string(offset_embedding->dim(0)));
  }
  Tensor<T> k = e.keys.tokens();
  const std::size_t c = k.dim(1);
  for (std::size_t r = 0; r < k.dim(0); ++r)
    for (std::size_t j = 0; j < c; ++j) k[r * c + j] += (*offset_embedding)[offset * c + j];
  return k;
}

template <Real T>
void check_pool(const TokenGrid<T>& q, const MemoryPool<T>& pool) {
  if (pool.empty()) throw EmptyMemoryError("plane attention over an empty memory pool");
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool.entry(i).keys.same_layout(q)) {
      throw DimensionError("plane attention: query grid " +
                           std::to_string(q.rows()) + "x" +
                           std::to_string(q.cols()) +
                           " does not match memory entry for frame " +
                           std::to_string(pool.entry(i).frame_index));
    }
  }
}

// Shared body of the two planes. `lines` is the number of independent
// slices (rows for XT, columns for TY); `line_tokens(l)` lists the token
// indices of slice l in order.
template <Real T, typename LineTokens>
TokenGrid<T> plane_attention(const TokenGrid<T>& q, const MemoryPool<T>& pool,
                             std::size_t heads, MacCounter* counter,
                             const Tensor<T>* offset_embedding, std::size_t lines,
                             LineTokens line_tokens) {
  check_pool(q, pool);
  std::vector<Tensor<T>> keys, values;
  keys.reserve(pool.size());
  values.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    keys.push_back(entry_keys(pool, i, offset_embedding));
    values.push_back(pool.entry(i).values.tokens());
  }
  Tensor<T> out({q.count(), q.channels()});
  for (std::size_t l = 0; l < lines; ++l) {
    const std::vector<std::size_t> idx = line_tokens(l);
    Tensor<T> qs = gather_rows(q.tokens(), idx);
    // Concatenate this slice across entries, oldest first.
    const std::size_t c = q.channels();
    Tensor<T> ks({pool.size() * idx.size(), c});
    Tensor<T> vs({pool.size() * idx.size(), c});
    for (std::size_t e = 0; e < pool.size(); ++e) {
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const std::size_t dst = (e * idx.size() + j) * c;
        std::copy_n(keys[e].data().data() + idx[j] * c, c, ks.data().data() + dst);
        std::copy_n(values[e].data().data() + idx[j] * c, c, vs.data().data() + dst);
      }
    }
    scatter_rows(out, scaled_dot_attention(qs, ks, vs, heads, counter), idx);
  }
  return TokenGrid<T>(q.rows(), q.cols(), std::move(out));
}

}  // namespace

std::vector<std::vector<std::size_t>> window_partition(std::size_t rows,
                                                       std::size_t cols,
                                                       std::size_t window) {
  if (window == 0) throw ConfigError("attention window must be positive");
  std::vector<std::vector<std::size_t>> tiles;
  for (std::size_t y0 = 0; y0 < rows; y0 += window) {
    for (std::size_t x0 = 0; x0 < cols; x0 += window) {
      std::vector<std::size_t> tile;
      for (std::size_t y = y0; y < std::min(rows, y0 + window); ++y)
        for (std::size_t x = x0; x < std::min(cols, x0 + window); ++x)
          tile.push_back(y * cols + x);
      tiles.push_back(std::move(tile));
    }
  }
  return tiles;
}

template <Real T>
void AttentionWeights<T>::validate() const {
  const std::size_t c = channels();
  if (c == 0) throw DimensionError("attention weights are empty");
  if (heads == 0 || c % heads != 0) {
    throw ConfigError("head count " + std::to_string(heads) +
                      " does not divide channel width " + std::to_string(c));
  }
  require_square(w_q, c, "w_q");
  require_square(w_k, c, "w_k");
  require_square(w_v, c, "w_v");
  require_square(w_o, c, "w_o");
  require_square(w_tq, c, "w_tq");
  require_square(w_to_xt, c, "w_to_xt");
  require_square(w_to_ty, c, "w_to_ty");
  if (alpha_xt.size() != c || alpha_ty.size() != c) {
    throw DimensionError("fusion gates must have " + std::to_string(c) +
                         " channels");
  }
  if (memory_offset_embedding && (memory_offset_embedding->rank() != 2 ||
                                  memory_offset_embedding->dim(1) != c)) {
    throw DimensionError("memory offset embedding must be [M×C]");
  }
}

template <Real T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k,
                               const Tensor<T>& v, std::size_t heads,
                               MacCounter* counter) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    throw DimensionError("scaled_dot_attention expects 2-D q, k, v");
  }
  if (k.dim(0) == 0) throw EmptyMemoryError("attention over zero keys");
  const std::size_t c = q.dim(1);
  if (k.dim(1) != c || v.dim(1) != c || v.dim(0) != k.dim(0)) {
    throw DimensionError("scaled_dot_attention: q " + shape_to_string(q.shape()) +
                         ", k " + shape_to_string(k.shape()) + ", v " +
                         shape_to_string(v.shape()));
  }
  if (heads == 0 || c % heads != 0) {
    throw ConfigError("head count " + std::to_string(heads) +
                      " does not divide channel width " + std::to_string(c));
  }
  const std::size_t d = c / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(d));
  Tensor<T> out({q.dim(0), c});
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor<T> logits = matmul(slice_cols(q, h * d, d),
                              transpose(slice_cols(k, h * d, d)), counter);
    for (auto& x : logits.data()) x *= scale;
    write_cols(out, matmul(softmax_rows(logits), slice_cols(v, h * d, d), counter),
               h * d);
  }
  return out;
}

template <Real T>
SpatialAttentionResult<T> spatial_self_attention(const TokenGrid<T>& x,
                                                 const AttentionWeights<T>& w,
                                                 std::optional<std::size_t> window,
                                                 MacCounter* counter) {
  if (window && *window == 0) throw ConfigError("attention window must be positive");
  CostScope scope(counter, CostCategory::kSpatialAttention);
  const Tensor<T>& xs = x.tokens();
  Tensor<T> q = matmul(xs, w.w_q, counter);
  Tensor<T> k = matmul(xs, w.w_k, counter);
  Tensor<T> v = matmul(xs, w.w_v, counter);
  Tensor<T> attended;
  if (!window) {
    attended = scaled_dot_attention(q, k, v, w.heads, counter);
  } else {
    attended = Tensor<T>({x.count(), x.channels()});
    for (const auto& tile : window_partition(x.rows(), x.cols(), *window)) {
      scatter_rows(attended,
                   scaled_dot_attention(gather_rows(q, tile), gather_rows(k, tile),
                                        gather_rows(v, tile), w.heads, counter),
                   tile);
    }
  }
  Tensor<T> o = matmul(attended, w.w_o, counter);
  return {TokenGrid<T>(x.rows(), x.cols(), std::move(o)),
          TokenGrid<T>(x.rows(), x.cols(), std::move(k)),
          TokenGrid<T>(x.rows(), x.cols(), std::move(v))};
}

template <Real T>
TokenGrid<T> xt_plane_attention(const TokenGrid<T>& q, const MemoryPool<T>& pool,
                                std::size_t heads, MacCounter* counter,
                                const Tensor<T>* offset_embedding) {
  return plane_attention(q, pool, heads, counter, offset_embedding, q.rows(),
                         [&](std::size_t y) {
                           std::vector<std::size_t> idx(q.cols());
                           for (std::size_t x = 0; x < q.cols(); ++x) idx[x] = q.index(y, x);
                           return idx;
                         });
}

template <Real T>
TokenGrid<T> ty_plane_attention(const TokenGrid<T>& q, const MemoryPool<T>& pool,
                                std::size_t heads, MacCounter* counter,
                                const Tensor<T>* offset_embedding) {
  return plane_attention(q, pool, heads, counter, offset_embedding, q.cols(),
                         [&](std::size_t x) {
                           std::vector<std::size_t> idx(q.rows());
                           for (std::size_t y = 0; y < q.rows(); ++y) idx[y] = q.index(y, x);
                           return idx;
                         });
}

template <Real T>
StreamingResult<T> streaming_t2d_attention(const TokenGrid<T>& x,
                                           const MemoryPool<T>& pool,
                                           const AttentionWeights<T>& w,
                                           std::int64_t frame_index,
                                           const StreamingOptions& options,
                                           MacCounter* counter) {
  auto spatial = spatial_self_attention(x, w, options.window, counter);
  MemoryPool<T> next = memory_push(pool, frame_index, spatial.keys, spatial.values);

  const Tensor<T>* offsets =
      w.memory_offset_embedding ? &*w.memory_offset_embedding : nullptr;
  TokenGrid<T> q_tilde;
  {
    CostScope scope(counter, CostCategory::kTemporalProjection);
    q_tilde = TokenGrid<T>(x.rows(), x.cols(),
                           matmul(spatial.output.tokens(), w.w_tq, counter));
  }
  TokenGrid<T> xt_raw, ty_raw;
  {
    CostScope scope(counter, CostCategory::kTemporalCrossAttention);
    xt_raw = xt_plane_attention(q_tilde, next, w.heads, counter, offsets);
    ty_raw = ty_plane_attention(q_tilde, next, w.heads, counter, offsets);
  }
  Tensor<T> xt, ty;
  {
    CostScope scope(counter, CostCategory::kTemporalProjection);
    xt = matmul(xt_raw.tokens(), w.w_to_xt, counter);
    ty = matmul(ty_raw.tokens(), w.w_to_ty, counter);
  }

  const Tensor<T>& o = spatial.output.tokens();
  const std::size_t c = x.channels();
  Tensor<T> fused(o.shape());
  for (std::size_t i = 0; i < o.size(); ++i) {
    const std::size_t ch = i % c;
    fused[i] = o[i] + w.alpha_xt[ch] * xt[i] + w.alpha_ty[ch] * ty[i];
  }

  StreamingResult<T> result;
  result.output = TokenGrid<T>(x.rows(), x.cols(), std::move(fused));
  result.pool = options.skip_memory_push ? pool : std::move(next);
  result.spatial = std::move(spatial.output);
  result.xt = TokenGrid<T>(x.rows(), x.cols(), std::move(xt));
  result.ty = TokenGrid<T>(x.rows(), x.cols(), std::move(ty));
  return result;
}

#define SVIT_INSTANTIATE_ATTENTION(T)                                          \
  template struct AttentionWeights<T>;                                         \
  template Tensor<T> scaled_dot_attention(const Tensor<T>&, const Tensor<T>&,  \
                                          const Tensor<T>&, std::size_t,       \
                                          MacCounter*);                        \
  template SpatialAttentionResult<T> spatial_self_attention(                   \
      const TokenGrid<T>&, const AttentionWeights<T>&,                         \
      std::optional<std::size_t>, MacCounter*);                                \
  template TokenGrid<T> xt_plane_attention(const TokenGrid<T>&,                \
                                           const MemoryPool<T>&, std::size_t,  \
                                           MacCounter*, const Tensor<T>*);     \
  template TokenGrid<T> ty_plane_attention(const TokenGrid<T>&,                \
                                           const MemoryPool<T>&, std::size_t,  \
                                           MacCounter*, const Tensor<T>*);     \
  template StreamingResult<T> streaming_t2d_attention(                         \
      const TokenGrid<T>&, const MemoryPool<T>&, const AttentionWeights<T>&,   \
      std::int64_t, const StreamingOptions&, MacCounter*);

SVIT_INSTANTIATE_ATTENTION(float)
SVIT_INSTANTIATE_ATTENTION(double)

#undef SVIT_INSTANTIATE_ATTENTION

}  // namespace svit
