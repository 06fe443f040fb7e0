#pragma once

#include <cstddef>
#include <span>

#include "svit/mac_counter.hpp"
#include "svit/tensor.hpp"

namespace svit {

// Default epsilon of every layer norm in the model.
inline constexpr double kLayerNormEps = 1e-6;

// C = A·B for A[m×k], B[k×n]. Adds m·k·n MACs to `counter` when enabled.
template <Real T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b,
                 MacCounter* counter = nullptr);

template <Real T>
Tensor<T> transpose(const Tensor<T>& a);

// Row-wise softmax, stabilised by subtracting the row maximum.
template <Real T>
Tensor<T> softmax_rows(const Tensor<T>& m);

// Normalises over the last axis, then applies gamma/beta per channel.
template <Real T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(kLayerNormEps));

// Tanh-approximated GELU.
template <Real T>
T gelu_scalar(T x);

template <Real T>
Tensor<T> gelu(const Tensor<T>& x);

// Cross-correlation of x[C_in×H×W] with kernel[C_out×C_in×kh×kw]; zero
// padding. Charges C_out·H'·W'·C_in·kh·kw MACs (padded taps included).
template <Real T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel,
                 std::size_t stride, std::size_t pad,
                 MacCounter* counter = nullptr);

// Transposed convolution with kernel[C_in×C_out×2s×2s], stride s ∈ {2,4},
// padding s/2: the output is exactly s× the input in each spatial axis and
// is the adjoint of conv2d(·, kernel, s, s/2). Charges C_in·H·W·C_out·(2s)²
// MACs (cropped taps included).
template <Real T>
Tensor<T> conv2d_transpose(const Tensor<T>& x, const Tensor<T>& kernel,
                           std::size_t stride, MacCounter* counter = nullptr);

// Elementwise helpers. Shapes must match exactly; there is no broadcasting.
template <Real T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <Real T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b);

// x[...×C] + bias[C] on every row.
template <Real T>
Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& bias);

// x[...×C] ⊙ scale[C] on every row.
template <Real T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& scale);

// [H×W×C] token grid <-> [C×H×W] feature map.
template <Real T>
Tensor<T> hwc_to_chw(const Tensor<T>& x);

template <Real T>
Tensor<T> chw_to_hwc(const Tensor<T>& x);

// Copies the listed rows of a 2-D tensor, in order.
template <Real T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> rows);

// dst[rows[i], :] = src[i, :]
template <Real T>
void scatter_rows(Tensor<T>& dst, const Tensor<T>& src,
                  std::span<const std::size_t> rows);

// Columns [offset, offset+width) of a 2-D tensor.
template <Real T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t offset,
                     std::size_t width);

template <Real T>
void write_cols(Tensor<T>& dst, const Tensor<T>& src, std::size_t offset);

}  // namespace svit
