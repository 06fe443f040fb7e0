#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "svit/mac_counter.hpp"
#include "svit/memory_pool.hpp"
#include "svit/tensor.hpp"
#include "svit/token_grid.hpp"

namespace svit {

// Parameters of one streaming attention block. All projections are C×C and
// applied on the right (x·W).
template <Real T>
struct AttentionWeights {
  Tensor<T> w_q, w_k, w_v, w_o;  // spatial self-attention
  Tensor<T> w_tq;                // temporal query, applied to the spatial output
  Tensor<T> w_to_xt, w_to_ty;    // per-plane output projections
  Tensor<T> alpha_xt, alpha_ty;  // per-channel fusion gates [C]
  std::size_t heads = 1;
  // Optional per-offset key embedding [M×C]; row d is added to the keys of
  // the memory entry d frames before the current one.
  std::optional<Tensor<T>> memory_offset_embedding;

  std::size_t channels() const { return w_q.rank() == 2 ? w_q.dim(0) : 0; }

  // Throws DimensionError/ConfigError on inconsistent shapes or head count.
  void validate() const;
};

// Multi-head softmax(q·kᵀ/√d)·v over heads of width d = C/heads, heads
// concatenated along channels. Charges 2·n_q·n_k·C MACs.
template <Real T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k,
                               const Tensor<T>& v, std::size_t heads,
                               MacCounter* counter = nullptr);

template <Real T>
struct SpatialAttentionResult {
  TokenGrid<T> output;  // o_t, after the output projection
  TokenGrid<T> keys;    // full-grid k_t for memory insertion
  TokenGrid<T> values;  // full-grid v_t
};

// Self-attention within one frame. With a window, the grid is split into
// window×window tiles (edge tiles clipped to the grid) that attend
// independently; keys/values returned for memory are always full-grid.
template <Real T>
SpatialAttentionResult<T> spatial_self_attention(
    const TokenGrid<T>& x, const AttentionWeights<T>& w,
    std::optional<std::size_t> window, MacCounter* counter = nullptr);

// XT plane: each row y of the query grid attends over row y of every pool
// entry (T_mem·N_w keys).
template <Real T>
TokenGrid<T> xt_plane_attention(const TokenGrid<T>& q, const MemoryPool<T>& pool,
                                std::size_t heads, MacCounter* counter = nullptr,
                                const Tensor<T>* offset_embedding = nullptr);

// TY plane: each column x attends over column x of every pool entry
// (T_mem·N_h keys).
template <Real T>
TokenGrid<T> ty_plane_attention(const TokenGrid<T>& q, const MemoryPool<T>& pool,
                                std::size_t heads, MacCounter* counter = nullptr,
                                const Tensor<T>* offset_embedding = nullptr);

struct StreamingOptions {
  std::optional<std::size_t> window;
  // Fault-injection hook: the current frame is used for its own temporal
  // attention but is not retained in the returned pool.
  bool skip_memory_push = false;
};

template <Real T>
struct StreamingResult {
  TokenGrid<T> output;     // o_t + α_xt⊙xt + α_ty⊙ty
  MemoryPool<T> pool;      // pool after inserting this frame
  TokenGrid<T> spatial;    // o_t
  TokenGrid<T> xt;         // XT branch after its output projection
  TokenGrid<T> ty;         // TY branch after its output projection
};

// One frame of streaming T2D attention. The frame's own keys/values are
// pushed before the temporal planes are evaluated, so frame t attends to
// frames max(1, t−M+1)..t.
template <Real T>
StreamingResult<T> streaming_t2d_attention(const TokenGrid<T>& x,
                                           const MemoryPool<T>& pool,
                                           const AttentionWeights<T>& w,
                                           std::int64_t frame_index,
                                           const StreamingOptions& options = {},
                                           MacCounter* counter = nullptr);

// Row-major tiles of a rows×cols grid, window×window, clipped at the edges.
// Each tile lists its token indices in row-major order.
std::vector<std::vector<std::size_t>> window_partition(std::size_t rows,
                                                       std::size_t cols,
                                                       std::size_t window);

}  // namespace svit
