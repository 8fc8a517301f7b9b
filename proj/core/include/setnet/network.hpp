#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "setnet/activations.hpp"
#include "setnet/dense_batch.hpp"
#include "setnet/sparse_weights.hpp"

namespace setnet {

/// How hidden weight matrices are stored. Auto picks dense storage for
/// sparsity 0 and sparse storage otherwise.
enum class HiddenStorage { Auto, Sparse, Dense };

struct NetworkConfig {
  /// Input, hidden..., classes. Every matrix but the last is a hidden layer.
  std::vector<std::size_t> layer_dims{3072, 4000, 1000, 4000, 10};
  ActivationKind activation = ActivationKind::ReLU;
  double sparsity = 0.0;
  double dropout_rate = 0.3;
  std::uint64_t seed = 0;
  HiddenStorage storage = HiddenStorage::Auto;

  void validate() const;
  bool sparse_hidden() const;
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t class_count() const { return layer_dims.back(); }
};

struct HiddenLayer {
  std::variant<SparseWeights, DenseWeights> weights;
  std::vector<double> bias;
  std::vector<double> bias_velocity;
  std::optional<SReLUParams> srelu;
  std::optional<SReLUParams> srelu_velocity;

  std::size_t n_in() const;
  std::size_t n_out() const;
  bool is_sparse() const { return std::holds_alternative<SparseWeights>(weights); }
  SparseWeights& sparse() { return std::get<SparseWeights>(weights); }
  const SparseWeights& sparse() const { return std::get<SparseWeights>(weights); }
  /// Stored parameter count of the weight matrix.
  std::size_t weight_count() const;
};

/// Sparse (or dense) hidden layers followed by a dense softmax output layer.
class Network {
 public:
  /// Initializes all weights from `rng`: U(-h, h) with h = sqrt(6/(n_in+n_out)),
  /// zero biases, SReLU parameters per SReLUParams::initial.
  Network(NetworkConfig config, std::mt19937_64& rng);

  const NetworkConfig& config() const { return config_; }
  std::vector<HiddenLayer>& hidden() { return hidden_; }
  const std::vector<HiddenLayer>& hidden() const { return hidden_; }
  DenseWeights& output() { return output_; }
  const DenseWeights& output() const { return output_; }
  std::vector<double>& output_bias() { return output_bias_; }
  const std::vector<double>& output_bias() const { return output_bias_; }
  std::vector<double>& output_bias_velocity() { return output_bias_velocity_; }

  friend void save_checkpoint(std::ostream&, const Network&);
  friend Network load_checkpoint(std::istream&);

 private:
  Network() = default;

  NetworkConfig config_;
  std::vector<HiddenLayer> hidden_;
  DenseWeights output_;
  std::vector<double> output_bias_;
  std::vector<double> output_bias_velocity_;
};

struct ForwardTrace {
  std::vector<DenseBatch> layer_inputs;   ///< input of every weight matrix, hidden then output
  std::vector<ActivationState> activation;  ///< per hidden layer
  std::vector<DenseBatch> masks;          ///< dropout masks, values in {0, 1/(1-p)}
  DenseBatch logits;
};

struct ForwardResult {
  DenseBatch probs;
  ForwardTrace trace;
};

/// Softmax probabilities. In training mode inverted dropout is applied to
/// every hidden activation and `dropout_rng` must be non-null.
ForwardResult forward(const Network& net, const DenseBatch& x, bool training,
                      std::mt19937_64* dropout_rng = nullptr);

struct LayerGradients {
  std::vector<double> weights;
  std::vector<double> bias;
  std::optional<SReLUParams> srelu;
};

struct Gradients {
  std::vector<LayerGradients> hidden;
  std::vector<double> output_weights;
  std::vector<double> output_bias;

  bool all_finite() const;
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

/// Mean categorical cross-entropy, probabilities clamped at 1e-12.
/// Throws std::invalid_argument on a label row that is not one-hot.
double cross_entropy(const DenseBatch& probs, const DenseBatch& labels);

LossAndGradients loss_and_backward(const Network& net, const ForwardTrace& trace,
                                   const DenseBatch& probs, const DenseBatch& labels);

/// Row-wise softmax with max subtraction.
DenseBatch softmax(const DenseBatch& logits);

// Checkpoint layout (little-endian):
//   char[8] "SETNET01", string config_json,
//   per hidden layer: u8 kind (0 sparse, 1 dense),
//     sparse: SparseWeights snapshot; dense: u64 n_in, u64 n_out, f64[] values,
//     f64[] bias, u8 has_srelu, [f64[] t_r, a_r, t_l, a_l],
//   output: u64 n_in, u64 n_out, f64[] values, f64[] bias.
// Strings and f64[] are u64-length prefixed. Velocities are not stored.
void save_checkpoint(std::ostream& out, const Network& net);
Network load_checkpoint(std::istream& in);

}  // namespace setnet
