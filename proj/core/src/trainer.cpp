#include "setnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "setnet/seeding.hpp"
#include "setnet/set_evolution.hpp"

namespace setnet {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout rate must be in [0, 1)");
  }
  if (evolution_enabled) EvolutionConfig{zeta, std::nullopt}.validate();
}

void sgd_momentum_step(std::span<double> params, std::span<const double> grads,
                       std::span<double> velocity, double lr, double mu) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw std::invalid_argument("sgd_momentum_step: " + std::to_string(params.size()) +
                                " params, " + std::to_string(grads.size()) + " grads, " +
                                std::to_string(velocity.size()) + " velocities");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw DivergenceError("non-finite gradient");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    velocity[k] = mu * velocity[k] - lr * grads[k];
    params[k] += velocity[k];
  }
}

void apply_gradients(Network& net, const Gradients& grads, double lr, double mu) {
  auto& hidden = net.hidden();
  if (grads.hidden.size() != hidden.size()) {
    throw std::invalid_argument("apply_gradients: layer count mismatch");
  }
  if (!grads.all_finite()) throw DivergenceError("non-finite gradient");
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    auto& layer = hidden[l];
    const auto& g = grads.hidden[l];
    if (layer.is_sparse()) {
      auto& w = layer.sparse();
      sgd_momentum_step(w.weights(), g.weights, w.momentum(), lr, mu);
    } else {
      auto& w = std::get<DenseWeights>(layer.weights);
      sgd_momentum_step(w.values, g.weights, w.momentum, lr, mu);
    }
    sgd_momentum_step(layer.bias, g.bias, layer.bias_velocity, lr, mu);
    if (layer.srelu) {
      if (!g.srelu) throw std::invalid_argument("apply_gradients: missing SReLU gradients");
      auto& p = *layer.srelu;
      auto& v = *layer.srelu_velocity;
      sgd_momentum_step(p.t_r, g.srelu->t_r, v.t_r, lr, mu);
      sgd_momentum_step(p.a_r, g.srelu->a_r, v.a_r, lr, mu);
      sgd_momentum_step(p.t_l, g.srelu->t_l, v.t_l, lr, mu);
      sgd_momentum_step(p.a_l, g.srelu->a_l, v.a_l, lr, mu);
    }
  }
  sgd_momentum_step(net.output().values, grads.output_weights, net.output().momentum, lr, mu);
  sgd_momentum_step(net.output_bias(), grads.output_bias, net.output_bias_velocity(), lr, mu);
}

TrainingStreams TrainingStreams::from_seed(std::uint64_t seed, std::size_t hidden_layers) {
  TrainingStreams s{std::mt19937_64(mix_seed(seed, "init")),
                    std::mt19937_64(mix_seed(seed, "shuffle")),
                    std::mt19937_64(mix_seed(seed, "dropout")),
                    {}};
  const auto evo = mix_seed(seed, "evolution");
  for (std::size_t l = 0; l < hidden_layers; ++l) {
    s.evolution.emplace_back(mix_seed(evo, static_cast<std::uint64_t>(l)));
  }
  return s;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

Evaluation evaluate(const Network& net, const Split& split) {
  if (split.size() == 0) throw std::invalid_argument("evaluate: empty split");
  constexpr std::size_t kChunk = 500;
  std::size_t correct = 0;
  double loss_sum = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < split.size(); start += kChunk) {
    const std::size_t end = std::min(split.size(), start + kChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto xb = gather_rows(split.x, idx);
    const auto yb = gather_rows(split.y, idx);
    const auto fwd = forward(net, xb, false);
    loss_sum += cross_entropy(fwd.probs, yb) * static_cast<double>(idx.size());
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto p = fwd.probs.row(b);
      const auto y = yb.row(b);
      const auto predicted = std::max_element(p.begin(), p.end()) - p.begin();
      const auto truth = std::max_element(y.begin(), y.end()) - y.begin();
      if (predicted == truth) ++correct;
    }
  }
  const auto n = static_cast<double>(split.size());
  return {static_cast<double>(correct) / n, loss_sum / n};
}

EpochRecord train_epoch(Network& net, const Dataset& data, const TrainConfig& cfg,
                        TrainingStreams& streams, std::size_t epoch) {
  const auto started = std::chrono::steady_clock::now();
  if (data.train.size() == 0 || data.val.size() == 0) {
    throw std::invalid_argument("train_epoch: dataset needs train and validation samples");
  }
  const auto order = epoch_order(data.train.size(), streams.shuffle);
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg.batch_size);
    const std::span<const std::size_t> batch(order.data() + start, end - start);
    const auto xb = gather_rows(data.train.x, batch);
    const auto yb = gather_rows(data.train.y, batch);
    ForwardResult fwd;
    try {
      fwd = forward(net, xb, true, &streams.dropout);
    } catch (const std::domain_error& e) {
      throw DivergenceError(e.what());
    }
    auto lg = loss_and_backward(net, fwd.trace, fwd.probs, yb);
    if (!std::isfinite(lg.loss)) throw DivergenceError("non-finite training loss");
    apply_gradients(net, lg.grads, cfg.learning_rate, cfg.momentum);
  }

  if (cfg.evolution_enabled) {
    const EvolutionConfig evo{cfg.zeta, std::nullopt};
    auto& hidden = net.hidden();
    for (std::size_t l = 0; l < hidden.size(); ++l) {
      if (!hidden[l].is_sparse()) continue;
      hidden[l].weights = evolve(hidden[l].sparse(), evo, streams.evolution.at(l)).weights;
    }
  }

  EpochRecord rec;
  rec.epoch = epoch;
  try {
    const auto tr = evaluate(net, data.train);
    const auto va = evaluate(net, data.val);
    rec.train_accuracy = tr.accuracy;
    rec.train_loss = tr.loss;
    rec.val_accuracy = va.accuracy;
    rec.val_loss = va.loss;
  } catch (const std::domain_error& e) {
    throw DivergenceError(e.what());
  }
  if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
    throw DivergenceError("non-finite evaluation loss");
  }
  rec.overfit = rec.train_accuracy - rec.val_accuracy;
  rec.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

Network make_network(NetworkConfig base, const TrainConfig& cfg, TrainingStreams& streams) {
  base.dropout_rate = cfg.dropout_rate;
  base.seed = cfg.seed;
  return Network(std::move(base), streams.init);
}

std::vector<EpochRecord> train(Network& net, const Dataset& data, const TrainConfig& cfg,
                               TrainingStreams& streams,
                               const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  std::vector<EpochRecord> records;
  records.reserve(cfg.epochs);
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    records.push_back(train_epoch(net, data, cfg, streams, e));
    if (on_epoch) on_epoch(records.back());
  }
  return records;
}

}  // namespace setnet
