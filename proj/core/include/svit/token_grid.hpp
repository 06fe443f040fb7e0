#pragma once

#include <cstddef>

#include "svit/tensor.hpp"

namespace svit {

// An N_h×N_w grid of C-channel tokens, stored as an [N×C] matrix with token
// (y, x) at row y·N_w + x.
template <Real T>
class TokenGrid {
 public:
  TokenGrid() = default;

  TokenGrid(std::size_t rows, std::size_t cols, Tensor<T> tokens)
      : rows_(rows), cols_(cols), tokens_(std::move(tokens)) {
    if (tokens_.rank() != 2 || tokens_.dim(0) != rows_ * cols_) {
      throw DimensionError("token grid " + std::to_string(rows_) + "x" +
                           std::to_string(cols_) + " does not match tokens " +
                           shape_to_string(tokens_.shape()));
    }
  }

  // From an [N_h×N_w×C] tensor.
  static TokenGrid from_hwc(const Tensor<T>& grid) {
    if (grid.rank() != 3) {
      throw DimensionError("token grid expects [h×w×C], got " +
                           shape_to_string(grid.shape()));
    }
    return TokenGrid(grid.dim(0), grid.dim(1),
                     grid.reshaped({grid.dim(0) * grid.dim(1), grid.dim(2)}));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t count() const { return rows_ * cols_; }
  std::size_t channels() const { return tokens_.rank() == 2 ? tokens_.dim(1) : 0; }

  const Tensor<T>& tokens() const { return tokens_; }
  Tensor<T>& tokens() { return tokens_; }

  Tensor<T> hwc() const { return tokens_.reshaped({rows_, cols_, channels()}); }

  std::size_t index(std::size_t y, std::size_t x) const { return y * cols_ + x; }

  bool same_layout(const TokenGrid& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ &&
           channels() == other.channels();
  }

  friend bool operator==(const TokenGrid& a, const TokenGrid& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.tokens_ == b.tokens_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Tensor<T> tokens_;
};

}  // namespace svit
