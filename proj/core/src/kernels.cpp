#include "svit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace svit {

std::string_view cost_category_name(CostCategory c) {
  switch (c) {
    case CostCategory::kPatchEmbed: return "patch_embed";
    case CostCategory::kSpatialAttention: return "spatial_attention";
    case CostCategory::kTemporalProjection: return "temporal_projection";
    case CostCategory::kTemporalCrossAttention: return "temporal_cross_attention";
    case CostCategory::kMlp: return "mlp";
    case CostCategory::kResNetBlocks: return "resnet_blocks";
    case CostCategory::kAdaptor: return "adaptor";
    case CostCategory::kDecoder: return "decoder";
    case CostCategory::kOther: return "other";
  }
  return "unknown";
}

namespace {

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got " + shape_to_string(s));
  }
}

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a) +
                         " and " + shape_to_string(b) + " differ");
  }
}

}  // namespace

template <Real T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, MacCounter* counter) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " +
                         shape_to_string(a.shape()) + " by " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c({m, n});
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* pc = c.data().data();
  // i-p-j order: each C[i,j] accumulates A[i,p]·B[p,j] for p = 0..k-1 in
  // ascending order, the same order as the textbook triple loop.
  // Four p at a time keeps the running sum in a register; the additions
  // still happen one by one in ascending p.
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = pc + i * n;
    const T* arow = pa + i * k;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      const T a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
      const T* b0 = pb + p * n;
      const T* b1 = b0 + n;
      const T* b2 = b1 + n;
      const T* b3 = b2 + n;
      for (std::size_t j = 0; j < n; ++j) {
        T acc = crow[j];
        acc += a0 * b0[j];
        acc += a1 * b1[j];
        acc += a2 * b2[j];
        acc += a3 * b3[j];
        crow[j] = acc;
      }
    }
    for (; p < k; ++p) {
      const T aip = arow[p];
      const T* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  if (counter) counter->add(static_cast<std::uint64_t>(m) * k * n);
  return c;
}

template <Real T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank(a.shape(), 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  Tensor<T> t({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = a[i * c + j];
  return t;
}

template <Real T>
Tensor<T> softmax_rows(const Tensor<T>& m) {
  require_rank(m.shape(), 2, "softmax_rows");
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  Tensor<T> out({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    const T* in = m.data().data() + i * cols;
    T* o = out.data().data() + i * cols;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, in[j]);
    T sum = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (std::size_t j = 0; j < cols; ++j) o[j] /= sum;
  }
  return out;
}

template <Real T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t c = x.shape().back();
  if (gamma.size() != c || beta.size() != c) {
    throw DimensionError("layer_norm: affine parameters " +
                         shape_to_string(gamma.shape()) + "/" +
                         shape_to_string(beta.shape()) +
                         " do not match channel count of " +
                         shape_to_string(x.shape()));
  }
  if (!(eps > 0)) throw ConfigError("layer_norm: eps must be positive");
  Tensor<T> out(x.shape());
  const std::size_t tokens = x.size() / c;
  for (std::size_t t = 0; t < tokens; ++t) {
    const T* in = x.data().data() + t * c;
    T* o = out.data().data() + t * c;
    const bool constant =
        std::all_of(in, in + c, [&](T v) { return v == in[0]; });
    if (constant) {
      for (std::size_t j = 0; j < c; ++j) o[j] = beta[j];
      continue;
    }
    T mean = 0;
    for (std::size_t j = 0; j < c; ++j) mean += in[j];
    mean /= static_cast<T>(c);
    T var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<T>(c);
    const T inv = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j)
      o[j] = (in[j] - mean) * inv * gamma[j] + beta[j];
  }
  return out;
}

template <Real T>
T gelu_scalar(T x) {
  constexpr T k = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  return T(0.5) * x * (T(1) + std::tanh(k * (x + T(0.044715) * x * x * x)));
}

template <Real T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gelu_scalar(x[i]);
  return out;
}

template <Real T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel,
                 std::size_t stride, std::size_t pad, MacCounter* counter) {
  require_rank(x.shape(), 3, "conv2d input");
  require_rank(kernel.shape(), 4, "conv2d kernel");
  if (stride == 0) throw ConfigError("conv2d: stride must be >= 1");
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != cin) {
    throw DimensionError("conv2d: kernel " + shape_to_string(kernel.shape()) +
                         " does not match input " + shape_to_string(x.shape()));
  }
  const std::size_t ph = h + 2 * pad, pw = w + 2 * pad;
  if (ph < kh || pw < kw || (ph - kh) % stride || (pw - kw) % stride) {
    throw DimensionError("conv2d: non-integral output size for input " +
                         shape_to_string(x.shape()) + ", kernel " +
                         shape_to_string(kernel.shape()) + ", stride " +
                         std::to_string(stride) + ", pad " +
                         std::to_string(pad));
  }
  const std::size_t oh = (ph - kh) / stride + 1, ow = (pw - kw) / stride + 1;
  // im2col: row (oy, ox) holds the taps in (ci, ky, kx) order, zero where
  // the tap falls in the padding.
  const std::size_t taps = cin * kh * kw;
  Tensor<T> cols({oh * ow, taps});
  const T* px = x.data().data();
  T* pc = cols.data().data();
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      T* row = pc + (oy * ow + ox) * taps;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const std::size_t iy = oy * stride + ky;
          const bool row_in = iy >= pad && iy - pad < h;
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const std::size_t ix = ox * stride + kx;
            *row++ = row_in && ix >= pad && ix - pad < w
                         ? px[(ci * h + iy - pad) * w + ix - pad]
                         : T(0);
          }
        }
      }
    }
  }
  const Tensor<T> flat = kernel.reshaped({cout, taps});
  Tensor<T> out = transpose(matmul(cols, transpose(flat))).reshaped({cout, oh, ow});
  if (counter) {
    counter->add(static_cast<std::uint64_t>(cout) * oh * ow * cin * kh * kw);
  }
  return out;
}

template <Real T>
Tensor<T> conv2d_transpose(const Tensor<T>& x, const Tensor<T>& kernel,
                           std::size_t stride, MacCounter* counter) {
  if (stride != 2 && stride != 4) {
    throw ConfigError("conv2d_transpose: unsupported stride " +
                      std::to_string(stride) + " (expected 2 or 4)");
  }
  require_rank(x.shape(), 3, "conv2d_transpose input");
  require_rank(kernel.shape(), 4, "conv2d_transpose kernel");
  const std::size_t k = 2 * stride, pad = stride / 2;
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (kernel.dim(0) != cin || kernel.dim(2) != k || kernel.dim(3) != k) {
    throw DimensionError("conv2d_transpose: kernel " +
                         shape_to_string(kernel.shape()) +
                         " does not match input " + shape_to_string(x.shape()) +
                         " at stride " + std::to_string(stride));
  }
  const std::size_t cout = kernel.dim(1);
  const std::size_t oh = h * stride, ow = w * stride;
  // Every input pixel's contribution to its k×k output footprint at once,
  // then scatter-add the footprints (col2im).
  const Tensor<T> prod =
      matmul(transpose(x.reshaped({cin, h * w})), kernel.reshaped({cin, cout * k * k}));
  Tensor<T> out({cout, oh, ow});
  T* po = out.data().data();
  const T* pp = prod.data().data();
  for (std::size_t iy = 0; iy < h; ++iy) {
    for (std::size_t ix = 0; ix < w; ++ix) {
      const T* src = pp + (iy * w + ix) * cout * k * k;
      for (std::size_t co = 0; co < cout; ++co) {
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::size_t sy = iy * stride + ky;
          if (sy < pad || sy - pad >= oh) continue;
          T* orow = po + (co * oh + sy - pad) * ow;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t sx = ix * stride + kx;
            if (sx < pad || sx - pad >= ow) continue;
            orow[sx - pad] += src[(co * k + ky) * k + kx];
          }
        }
      }
    }
  }
  if (counter) {
    counter->add(static_cast<std::uint64_t>(cin) * h * w * cout * k * k);
  }
  return out;
}

template <Real T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <Real T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  require_same(a.shape(), b.shape(), "add_inplace");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <Real T>
Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  const std::size_t c = bias.size();
  if (x.rank() == 0 || x.shape().back() != c) {
    throw DimensionError("add_row_bias: bias " + shape_to_string(bias.shape()) +
                         " does not match " + shape_to_string(x.shape()));
  }
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + bias[i % c];
  return out;
}

template <Real T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& scale) {
  const std::size_t c = scale.size();
  if (x.rank() == 0 || x.shape().back() != c) {
    throw DimensionError("scale_channels: scale " +
                         shape_to_string(scale.shape()) + " does not match " +
                         shape_to_string(x.shape()));
  }
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * scale[i % c];
  return out;
}

template <Real T>
Tensor<T> hwc_to_chw(const Tensor<T>& x) {
  require_rank(x.shape(), 3, "hwc_to_chw");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor<T> out({c, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx)
      for (std::size_t ch = 0; ch < c; ++ch) out.at(ch, y, xx) = x.at(y, xx, ch);
  return out;
}

template <Real T>
Tensor<T> chw_to_hwc(const Tensor<T>& x) {
  require_rank(x.shape(), 3, "chw_to_hwc");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> out({h, w, c});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) out.at(y, xx, ch) = x.at(ch, y, xx);
  return out;
}

template <Real T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> rows) {
  require_rank(x.shape(), 2, "gather_rows");
  const std::size_t c = x.dim(1);
  Tensor<T> out({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.dim(0)) throw DimensionError("gather_rows: row out of range");
    std::copy_n(x.data().data() + rows[i] * c, c, out.data().data() + i * c);
  }
  return out;
}

template <Real T>
void scatter_rows(Tensor<T>& dst, const Tensor<T>& src,
                  std::span<const std::size_t> rows) {
  require_rank(dst.shape(), 2, "scatter_rows");
  if (src.rank() != 2 || src.dim(0) != rows.size() || src.dim(1) != dst.dim(1)) {
    throw DimensionError("scatter_rows: source " + shape_to_string(src.shape()) +
                         " does not fit destination " +
                         shape_to_string(dst.shape()));
  }
  const std::size_t c = dst.dim(1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(src.data().data() + i * c, c, dst.data().data() + rows[i] * c);
  }
}

template <Real T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t offset, std::size_t width) {
  require_rank(x.shape(), 2, "slice_cols");
  if (offset + width > x.dim(1)) throw DimensionError("slice_cols: out of range");
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor<T> out({r, width});
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(x.data().data() + i * c + offset, width,
                out.data().data() + i * width);
  return out;
}

template <Real T>
void write_cols(Tensor<T>& dst, const Tensor<T>& src, std::size_t offset) {
  require_rank(dst.shape(), 2, "write_cols");
  if (src.rank() != 2 || src.dim(0) != dst.dim(0) ||
      offset + src.dim(1) > dst.dim(1)) {
    throw DimensionError("write_cols: source " + shape_to_string(src.shape()) +
                         " does not fit destination " +
                         shape_to_string(dst.shape()));
  }
  const std::size_t r = dst.dim(0), c = dst.dim(1), w = src.dim(1);
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(src.data().data() + i * w, w, dst.data().data() + i * c + offset);
}

#define SVIT_INSTANTIATE_KERNELS(T)                                            \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&, MacCounter*);  \
  template Tensor<T> transpose(const Tensor<T>&);                              \
  template Tensor<T> softmax_rows(const Tensor<T>&);                           \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&,            \
                                const Tensor<T>&, T);                          \
  template T gelu_scalar(T);                                                   \
  template Tensor<T> gelu(const Tensor<T>&);                                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, std::size_t,   \
                            std::size_t, MacCounter*);                         \
  template Tensor<T> conv2d_transpose(const Tensor<T>&, const Tensor<T>&,      \
                                      std::size_t, MacCounter*);               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                  \
  template void add_inplace(Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> add_row_bias(const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> scale_channels(const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> hwc_to_chw(const Tensor<T>&);                             \
  template Tensor<T> chw_to_hwc(const Tensor<T>&);                             \
  template Tensor<T> gather_rows(const Tensor<T>&,                             \
                                 std::span<const std::size_t>);                \
  template void scatter_rows(Tensor<T>&, const Tensor<T>&,                     \
                             std::span<const std::size_t>);                    \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);   \
  template void write_cols(Tensor<T>&, const Tensor<T>&, std::size_t);

SVIT_INSTANTIATE_KERNELS(float)
SVIT_INSTANTIATE_KERNELS(double)

#undef SVIT_INSTANTIATE_KERNELS

}  // namespace svit
