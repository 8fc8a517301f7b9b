#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "setnet/data.hpp"
#include "setnet/network.hpp"

namespace setnet {

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double zeta = 0.3;
  std::size_t batch_size = 100;
  double dropout_rate = 0.3;
  std::size_t epochs = 500;
  std::uint64_t seed = 0;
  bool evolution_enabled = true;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double overfit = 0.0;  ///< train_accuracy - val_accuracy
  double wall_time = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

/// Raised when loss, activations or gradients stop being finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// v <- mu * v - lr * g; p <- p + v. Leaves everything untouched and throws
/// DivergenceError if any gradient is non-finite.
void sgd_momentum_step(std::span<double> params, std::span<const double> grads,
                       std::span<double> velocity, double lr, double mu);

/// Applies sgd_momentum_step to every parameter group of the network.
void apply_gradients(Network& net, const Gradients& grads, double lr, double mu);

/// Independent random streams of one training run, all derived from one seed.
struct TrainingStreams {
  std::mt19937_64 init;
  std::mt19937_64 shuffle;
  std::mt19937_64 dropout;
  std::vector<std::mt19937_64> evolution;  ///< one per hidden layer

  static TrainingStreams from_seed(std::uint64_t seed, std::size_t hidden_layers);
};

/// Seeded permutation of [0, n) used to order one epoch's batches.
std::vector<std::size_t> epoch_order(std::size_t n, std::mt19937_64& rng);

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

/// Dropout off; argmax ties go to the lowest class index.
Evaluation evaluate(const Network& net, const Split& split);

/// One shuffled pass of minibatch SGD, then SET evolution of every sparse
/// hidden layer (when enabled), then evaluation of both splits.
EpochRecord train_epoch(Network& net, const Dataset& data, const TrainConfig& cfg,
                        TrainingStreams& streams, std::size_t epoch);

/// Network configured from `base` with the run's dropout rate and seed.
Network make_network(NetworkConfig base, const TrainConfig& cfg, TrainingStreams& streams);

/// cfg.epochs calls of train_epoch. `on_epoch` sees each record as it lands.
std::vector<EpochRecord> train(Network& net, const Dataset& data, const TrainConfig& cfg,
                               TrainingStreams& streams,
                               const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace setnet
