#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "svit/memory_pool.hpp"
#include "svit/tensor.hpp"
#include "svit/token_grid.hpp"
#include "svit/weights.hpp"

namespace svit {

// Reverse-mode gradients of ⟨upstream, layer(x)⟩ for one streaming
// Transformer layer. Always 64-bit.
struct LayerGradients {
  Tensor<double> x;                     // [N×C]
  LayerWeights<double> weights;         // same layout as the parameters
  // ∂loss/∂(stored K,V) of every entry of the pool the layer attended to
  // (history plus the frame itself, oldest first). Identically zero when the
  // stop-gradient is honoured.
  std::vector<Tensor<double>> memory_keys;
  std::vector<Tensor<double>> memory_values;
};

struct LayerProblem {
  TokenGrid<double> x;               // layer input Z for the current frame
  MemoryPool<double> pool;           // memory before this frame
  std::int64_t frame_index = 1;
  LayerWeights<double> weights;      // no memory offset embedding
  std::optional<std::size_t> window;
};

// Layer forward. When `frozen_current` is given, the memory entry inserted
// for the current frame holds those keys/values instead of the ones computed
// from x; the spatial attention still uses the live ones. This is how a
// stop-gradient is expressed to a finite-difference probe.
TokenGrid<double> layer_forward(const LayerProblem& problem,
                                const MemoryEntry<double>* frozen_current = nullptr);

LayerGradients layer_backward(const LayerProblem& problem, const Tensor<double>& upstream,
                              bool honor_sg);

// Central differences (f(θ+h·eᵢ) − f(θ−h·eᵢ)) / 2h for every coordinate.
Tensor<double> finite_diff(const std::function<double(const Tensor<double>&)>& f,
                           const Tensor<double>& theta, double h);

// Named views of the trainable tensors of a layer, in a fixed order.
std::vector<std::pair<std::string, Tensor<double>*>> layer_parameters(LayerWeights<double>& w);

// |a−b| / max(|a|, |b|, floor), maximised over coordinates. The default
// floor keeps components near the central-difference noise level (about
// 1e-10 absolute at h=1e-5) from dominating the ratio.
inline constexpr double kRelativeErrorFloor = 1e-5;
double max_relative_error(const Tensor<double>& analytic, const Tensor<double>& numeric,
                          double floor = kRelativeErrorFloor);

struct GradcheckCase {
  std::uint64_t seed = 0;
  std::size_t rows = 3;
  std::size_t cols = 5;
  std::size_t channels = 8;
  std::size_t heads = 2;
  std::size_t mlp_hidden = 16;
  std::size_t history = 2;             // frames already in memory
  Capacity capacity;
  std::optional<std::size_t> window;
  double step = 1e-5;
};

// Random layer, input, history and upstream drawn from `seed`. Fusion gates
// are drawn at O(1) scale so the temporal branches carry measurable
// gradients.
LayerProblem make_gradcheck_problem(const GradcheckCase& c);
Tensor<double> make_gradcheck_upstream(const GradcheckCase& c);

struct GradcheckResult {
  GradcheckCase config;
  // Max relative error per parameter ("x" for the input), sg honoured.
  std::vector<std::pair<std::string, double>> errors_sg;
  // Same with the stop-gradient disabled (gradients flow into the current
  // frame's stored K/V), including the memory entries themselves.
  std::vector<std::pair<std::string, double>> errors_no_sg;
  double max_error = 0;
  double memory_block_sg = 0;     // max |memory grad| with sg honoured
  double memory_block_no_sg = 0;  // ... and with sg disabled
  bool forward_sg_invariant = false;
};

GradcheckResult run_gradcheck(const GradcheckCase& c);

// Plain-text table plus `key=value` block for a batch of cases.
std::string format_gradcheck_report(const std::vector<GradcheckResult>& results,
                                    double tolerance);

}  // namespace svit
