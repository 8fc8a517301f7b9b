#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace setnet {

/// Row-major batch of real values: activations, gradients or inputs.
struct DenseBatch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  DenseBatch() = default;
  DenseBatch(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}
  DenseBatch(std::size_t r, std::size_t c, std::vector<double> v);

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }

  bool all_finite() const;

  friend bool operator==(const DenseBatch&, const DenseBatch&) = default;
};

/// Copies the listed rows of `src` into a new batch, in the given order.
DenseBatch gather_rows(const DenseBatch& src, std::span<const std::size_t> indices);

}  // namespace setnet
