#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace catprobe {

// Dense square matrix, row-major.
template <typename T>
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, T fill = T{}) : n_(n), cells_(n * n, fill) {}
  SquareMatrix(std::size_t n, std::vector<T> cells) : n_(n), cells_(std::move(cells)) {
    assert(cells_.size() == n_ * n_);
  }

  std::size_t size() const { return n_; }
  bool empty() const { return n_ == 0; }

  T& operator()(std::size_t i, std::size_t j) { return cells_[i * n_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return cells_[i * n_ + j]; }

  std::span<T> row(std::size_t i) { return {cells_.data() + i * n_, n_}; }
  std::span<const T> row(std::size_t i) const { return {cells_.data() + i * n_, n_}; }

  std::span<const T> cells() const { return cells_; }
  std::span<T> cells() { return cells_; }

  // Rows and columns restricted to `keep`, in the order given.
  SquareMatrix principal_submatrix(std::span<const std::size_t> keep) const {
    SquareMatrix out(keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r)
      for (std::size_t c = 0; c < keep.size(); ++c) out(r, c) = (*this)(keep[r], keep[c]);
    return out;
  }

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<T> cells_;
};

using AttentionMatrix = SquareMatrix<float>;
// Hop counts between leaf tokens.
using DistanceMatrix = SquareMatrix<std::uint32_t>;

}  // namespace catprobe
