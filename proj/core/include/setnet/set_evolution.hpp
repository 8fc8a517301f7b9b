#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "setnet/sparse_weights.hpp"

namespace setnet {

/// Fraction of absent connections, 0 <= sparsity < 1. Zero means dense.
class SparsityLevel {
 public:
  explicit SparsityLevel(double sparsity);

  double sparsity() const { return sparsity_; }
  double density() const { return 1.0 - sparsity_; }
  bool is_dense() const { return sparsity_ == 0.0; }

  /// "98.85" style percentage with two decimals, or "dense".
  std::string label() const;

  friend bool operator==(const SparsityLevel&, const SparsityLevel&) = default;

 private:
  double sparsity_;
};

/// The sparsity levels swept by default, sparsest first, dense last.
std::vector<SparsityLevel> default_sparsity_levels();

struct EvolutionConfig {
  double zeta = 0.3;
  /// Half-width of the regrowth weight distribution; the layer's
  /// initialization half-width when unset.
  std::optional<double> regrow_half_width;

  void validate() const;
};

/// epsilon = (1 - sparsity) * n_l * n_l1 / (n_l + n_l1)
double epsilon_from_sparsity(SparsityLevel level, std::size_t n_l, std::size_t n_l1);

/// Connection count realizing `level` on an n_l x n_l1 matrix. A product that
/// is integral up to floating-point noise is taken as is; a genuinely
/// fractional count is rounded up to the next whole connection.
std::size_t expected_param_count(SparsityLevel level, std::size_t n_l, std::size_t n_l1);

/// sqrt(6 / (n_in + n_out)); weights and regrown weights are U(-h, h).
double init_half_width(std::size_t n_in, std::size_t n_out);

/// Exactly expected_param_count distinct positions, uniform without
/// replacement; weights U(-h, h), momentum zero.
SparseWeights init_sparse_layer(SparsityLevel level, std::size_t n_l, std::size_t n_l1,
                                std::mt19937_64& rng);

DenseWeights init_dense_layer(std::size_t n_in, std::size_t n_out, std::mt19937_64& rng);

struct EvolveResult {
  SparseWeights weights;
  std::vector<Connection> pruned;     ///< removed connections, storage order
  std::vector<Connection> regrown;    ///< new connections, sampling order
  std::size_t shortfall = 0;          ///< requested regrowths with no empty cell left
};

/// One SET step: drop the floor(zeta * nnz) connections of smallest |weight|
/// (ties by (row, col) order), then grow the same number at uniformly chosen
/// cells that were empty before the step. Surviving momentum is kept,
/// regrown momentum is zero.
EvolveResult evolve(const SparseWeights& w, const EvolutionConfig& cfg,
                    std::mt19937_64& rng);

}  // namespace setnet
