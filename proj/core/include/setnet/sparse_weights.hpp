#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "setnet/dense_batch.hpp"

namespace setnet {

/// One stored connection of a sparse weight matrix.
struct Connection {
  std::uint32_t row = 0;  ///< input neuron, in [0, n_in)
  std::uint32_t col = 0;  ///< output neuron, in [0, n_out)
  double weight = 0.0;
  double momentum = 0.0;

  friend bool operator==(const Connection&, const Connection&) = default;
};

/// Row-compressed sparse weight matrix between two consecutive layers.
///
/// Connections are kept in (row, col) lexicographic order; `row_offsets()`
/// has n_in + 1 entries, and the connections of input neuron `i` occupy
/// the index range [row_offsets()[i], row_offsets()[i + 1]). Every stored
/// connection carries its own momentum (velocity) entry.
class SparseWeights {
 public:
  SparseWeights() = default;

  /// An empty (zero-connection) matrix of the given shape.
  SparseWeights(std::size_t n_in, std::size_t n_out);

  /// Builds the index from an arbitrary-order list. Throws
  /// std::invalid_argument on out-of-range or duplicate positions.
  static SparseWeights from_connections(std::size_t n_in, std::size_t n_out,
                                        std::vector<Connection> connections);

  std::size_t n_in() const { return n_in_; }
  std::size_t n_out() const { return n_out_; }
  std::size_t nnz() const { return cols_.size(); }
  std::size_t capacity() const { return n_in_ * n_out_; }

  std::span<const std::size_t> row_offsets() const { return row_offsets_; }
  std::span<const std::uint32_t> cols() const { return cols_; }
  std::span<const double> weights() const { return weights_; }
  std::span<double> weights() { return weights_; }
  std::span<const double> momentum() const { return momentum_; }
  std::span<double> momentum() { return momentum_; }

  /// Row of the k-th stored connection (O(log n_in)).
  std::uint32_t row_of(std::size_t k) const;

  /// Connection list in storage order.
  std::vector<Connection> connections() const;

  /// Zero-filled dense copy, n_in x n_out row-major.
  std::vector<double> to_dense() const;

  friend bool operator==(const SparseWeights&, const SparseWeights&) = default;

 private:
  std::size_t n_in_ = 0;
  std::size_t n_out_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::uint32_t> cols_;
  std::vector<double> weights_;
  std::vector<double> momentum_;
};

/// Fully populated weight matrix, W[i][j] at values[i * n_out + j].
struct DenseWeights {
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::vector<double> values;
  std::vector<double> momentum;

  DenseWeights() = default;
  DenseWeights(std::size_t in, std::size_t out)
      : n_in(in), n_out(out), values(in * out, 0.0), momentum(in * out, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return values[i * n_out + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * n_out + j]; }

  friend bool operator==(const DenseWeights&, const DenseWeights&) = default;
};

struct WeightGradients {
  std::vector<double> grad_w;  ///< one entry per stored connection / cell
  DenseBatch grad_x;
};

/// result[b][j] = sum over stored (i, j) of x[b][i] * w(i, j).
DenseBatch sparse_forward(const SparseWeights& w, const DenseBatch& x);

/// Gradients with respect to the stored connections and to the input.
WeightGradients sparse_backward(const SparseWeights& w, const DenseBatch& x,
                                const DenseBatch& grad_out);

DenseBatch dense_forward(const DenseWeights& w, const DenseBatch& x);
WeightGradients dense_backward(const DenseWeights& w, const DenseBatch& x,
                               const DenseBatch& grad_out);

/// nnz / (n_in * n_out). Throws on a zero-dimension matrix.
double density(const SparseWeights& w);
double sparsity(const SparseWeights& w);

// Snapshot format (little-endian):
//   char[4] "SPWT", u32 version (=1), u64 n_in, u64 n_out, u64 nnz,
//   then nnz records of { u64 row, u64 col, f64 weight } in (row, col) order.
// Momentum is not part of the snapshot and reloads as zero.
void write_snapshot(std::ostream& out, const SparseWeights& w);
SparseWeights read_snapshot(std::istream& in);

}  // namespace setnet
