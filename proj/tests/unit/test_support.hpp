#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "svit/attention.hpp"
#include "svit/rng.hpp"
#include "svit/tensor.hpp"

namespace svit::testing {

template <Real T = double>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Textbook triple loop.
inline Tensor<double> naive_matmul(const Tensor<double>& a, const Tensor<double>& b) {
  Tensor<double> c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = 0;
      for (std::size_t p = 0; p < a.dim(1); ++p) s += a.at(i, p) * b.at(p, j);
      c.at(i, j) = s;
    }
  return c;
}

// softmax(q·kᵀ/√d)·v one head, one query at a time, written out longhand.
inline Tensor<double> loop_attention(const Tensor<double>& q, const Tensor<double>& k,
                                     const Tensor<double>& v, std::size_t heads) {
  const std::size_t c = q.dim(1), d = c / heads;
  Tensor<double> out({q.dim(0), c});
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < q.dim(0); ++i) {
      std::vector<double> logits(k.dim(0));
      double mx = -INFINITY;
      for (std::size_t j = 0; j < k.dim(0); ++j) {
        double s = 0;
        for (std::size_t e = 0; e < d; ++e) s += q.at(i, h * d + e) * k.at(j, h * d + e);
        logits[j] = s / std::sqrt(static_cast<double>(d));
        mx = std::max(mx, logits[j]);
      }
      double z = 0;
      for (auto& l : logits) z += (l = std::exp(l - mx));
      for (std::size_t e = 0; e < d; ++e) {
        double acc = 0;
        for (std::size_t j = 0; j < k.dim(0); ++j) acc += logits[j] / z * v.at(j, h * d + e);
        out.at(i, h * d + e) = acc;
      }
    }
  }
  return out;
}

template <Real T = double>
AttentionWeights<T> random_attention(std::size_t channels, std::size_t heads,
                                     std::uint64_t seed, double gate = 0.5) {
  const double a = 1.0 / std::sqrt(static_cast<double>(channels));
  AttentionWeights<T> w;
  w.heads = heads;
  w.w_q = random_tensor<T>({channels, channels}, seed + 1, -a, a);
  w.w_k = random_tensor<T>({channels, channels}, seed + 2, -a, a);
  w.w_v = random_tensor<T>({channels, channels}, seed + 3, -a, a);
  w.w_o = random_tensor<T>({channels, channels}, seed + 4, -a, a);
  w.w_tq = random_tensor<T>({channels, channels}, seed + 5, -a, a);
  w.w_to_xt = random_tensor<T>({channels, channels}, seed + 6, -a, a);
  w.w_to_ty = random_tensor<T>({channels, channels}, seed + 7, -a, a);
  w.alpha_xt = Tensor<T>::filled({channels}, static_cast<T>(gate));
  w.alpha_ty = Tensor<T>::filled({channels}, static_cast<T>(gate));
  return w;
}

}  // namespace svit::testing
