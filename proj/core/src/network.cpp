#include "setnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"
#include "setnet/json_io.hpp"
#include "setnet/set_evolution.hpp"

namespace setnet {

void NetworkConfig::validate() const {
  if (layer_dims.size() < 2) throw std::invalid_argument("network needs at least 2 layer dims");
  for (auto d : layer_dims) {
    if (d == 0) throw std::invalid_argument("layer dims must be positive");
  }
  if (!(sparsity >= 0.0 && sparsity < 1.0)) {
    throw std::invalid_argument("sparsity must be in [0, 1)");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout rate must be in [0, 1)");
  }
}

bool NetworkConfig::sparse_hidden() const {
  switch (storage) {
    case HiddenStorage::Sparse: return true;
    case HiddenStorage::Dense: return false;
    case HiddenStorage::Auto: break;
  }
  return sparsity != 0.0;
}

std::size_t HiddenLayer::n_in() const {
  return std::visit([](const auto& w) -> std::size_t {
    if constexpr (std::is_same_v<std::decay_t<decltype(w)>, SparseWeights>) return w.n_in();
    else return w.n_in;
  }, weights);
}

std::size_t HiddenLayer::n_out() const {
  return std::visit([](const auto& w) -> std::size_t {
    if constexpr (std::is_same_v<std::decay_t<decltype(w)>, SparseWeights>) return w.n_out();
    else return w.n_out;
  }, weights);
}

std::size_t HiddenLayer::weight_count() const {
  return std::visit([](const auto& w) -> std::size_t {
    if constexpr (std::is_same_v<std::decay_t<decltype(w)>, SparseWeights>) return w.nnz();
    else return w.values.size();
  }, weights);
}

Network::Network(NetworkConfig config, std::mt19937_64& rng) : config_(std::move(config)) {
  config_.validate();
  const auto& dims = config_.layer_dims;
  const std::size_t hidden_count = dims.size() - 2;
  hidden_.reserve(hidden_count);
  for (std::size_t l = 0; l < hidden_count; ++l) {
    HiddenLayer layer;
    const std::size_t n_in = dims[l];
    const std::size_t n_out = dims[l + 1];
    if (config_.sparse_hidden()) {
      layer.weights = init_sparse_layer(SparsityLevel(config_.sparsity), n_in, n_out, rng);
    } else {
      layer.weights = init_dense_layer(n_in, n_out, rng);
    }
    layer.bias.assign(n_out, 0.0);
    layer.bias_velocity.assign(n_out, 0.0);
    if (config_.activation == ActivationKind::SReLU) {
      layer.srelu = SReLUParams::initial(n_out, rng);
      layer.srelu_velocity = SReLUParams::zeros(n_out);
    }
    hidden_.push_back(std::move(layer));
  }
  output_ = init_dense_layer(dims[dims.size() - 2], dims.back(), rng);
  output_bias_.assign(dims.back(), 0.0);
  output_bias_velocity_.assign(dims.back(), 0.0);
}

namespace {

void add_bias(DenseBatch& z, const std::vector<double>& bias) {
  for (std::size_t b = 0; b < z.rows; ++b) {
    auto r = z.row(b);
    for (std::size_t j = 0; j < z.cols; ++j) r[j] += bias[j];
  }
}

void sum_rows_into(const DenseBatch& g, std::vector<double>& out) {
  out.assign(g.cols, 0.0);
  for (std::size_t b = 0; b < g.rows; ++b) {
    const auto r = g.row(b);
    for (std::size_t j = 0; j < g.cols; ++j) out[j] += r[j];
  }
}

}  // namespace

DenseBatch softmax(const DenseBatch& logits) {
  DenseBatch probs(logits.rows, logits.cols);
  for (std::size_t b = 0; b < logits.rows; ++b) {
    const auto in = logits.row(b);
    auto out = probs.row(b);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = std::exp(in[j] - mx);
      total += out[j];
    }
    for (auto& p : out) p /= total;
  }
  return probs;
}

ForwardResult forward(const Network& net, const DenseBatch& x, bool training,
                      std::mt19937_64* dropout_rng) {
  const auto& cfg = net.config();
  if (x.cols != cfg.input_dim()) {
    throw std::invalid_argument("forward: input has " + std::to_string(x.cols) +
                                " features, network expects " +
                                std::to_string(cfg.input_dim()));
  }
  const double p = cfg.dropout_rate;
  const bool drop = training && p > 0.0;
  if (drop && dropout_rng == nullptr) {
    throw std::invalid_argument("forward: training with dropout needs an rng");
  }

  ForwardResult result;
  auto& trace = result.trace;
  DenseBatch current = x;
  for (const auto& layer : net.hidden()) {
    DenseBatch z = layer.is_sparse() ? sparse_forward(layer.sparse(), current)
                                     : dense_forward(std::get<DenseWeights>(layer.weights), current);
    add_bias(z, layer.bias);
    if (!z.all_finite()) throw std::domain_error("forward: non-finite pre-activation (diverged)");
    auto act = act_forward(cfg.activation, layer.srelu ? &*layer.srelu : nullptr, z);
    DenseBatch mask(act.output.rows, act.output.cols, 1.0);
    if (drop) {
      std::bernoulli_distribution keep(1.0 - p);
      const double scale = 1.0 / (1.0 - p);
      for (std::size_t k = 0; k < mask.values.size(); ++k) {
        mask.values[k] = keep(*dropout_rng) ? scale : 0.0;
        act.output.values[k] *= mask.values[k];
      }
    }
    trace.layer_inputs.push_back(std::move(current));
    trace.activation.push_back(std::move(act.state));
    trace.masks.push_back(std::move(mask));
    current = std::move(act.output);
  }
  DenseBatch logits = dense_forward(net.output(), current);
  add_bias(logits, net.output_bias());
  if (!logits.all_finite()) throw std::domain_error("forward: non-finite logits (diverged)");
  trace.layer_inputs.push_back(std::move(current));
  result.probs = softmax(logits);
  trace.logits = std::move(logits);
  return result;
}

namespace {

void check_one_hot(const DenseBatch& labels) {
  for (std::size_t b = 0; b < labels.rows; ++b) {
    std::size_t ones = 0;
    for (double v : labels.row(b)) {
      if (v == 1.0) ++ones;
      else if (v != 0.0) ones = 2;
    }
    if (ones != 1) {
      throw std::invalid_argument("label row " + std::to_string(b) + " is not one-hot");
    }
  }
}

}  // namespace

double cross_entropy(const DenseBatch& probs, const DenseBatch& labels) {
  if (probs.rows != labels.rows || probs.cols != labels.cols) {
    throw std::invalid_argument("cross_entropy: probs and labels differ in shape");
  }
  check_one_hot(labels);
  if (probs.rows == 0) return 0.0;
  double total = 0.0;
  for (std::size_t b = 0; b < probs.rows; ++b) {
    const auto l = labels.row(b);
    const auto cls = static_cast<std::size_t>(std::find(l.begin(), l.end(), 1.0) - l.begin());
    total -= std::log(std::max(probs.at(b, cls), 1e-12));
  }
  return total / static_cast<double>(probs.rows);
}

bool Gradients::all_finite() const {
  const auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  for (const auto& l : hidden) {
    if (!finite(l.weights) || !finite(l.bias)) return false;
    if (l.srelu && !l.srelu->consistent()) return false;
  }
  return finite(output_weights) && finite(output_bias);
}

LossAndGradients loss_and_backward(const Network& net, const ForwardTrace& trace,
                                   const DenseBatch& probs, const DenseBatch& labels) {
  LossAndGradients out;
  out.loss = cross_entropy(probs, labels);

  const double inv_batch = probs.rows ? 1.0 / static_cast<double>(probs.rows) : 0.0;
  DenseBatch grad(probs.rows, probs.cols);
  for (std::size_t k = 0; k < grad.values.size(); ++k) {
    grad.values[k] = (probs.values[k] - labels.values[k]) * inv_batch;
  }

  const auto& hidden = net.hidden();
  auto head = dense_backward(net.output(), trace.layer_inputs.back(), grad);
  out.grads.output_weights = std::move(head.grad_w);
  sum_rows_into(grad, out.grads.output_bias);
  grad = std::move(head.grad_x);

  out.grads.hidden.resize(hidden.size());
  for (std::size_t l = hidden.size(); l-- > 0;) {
    const auto& layer = hidden[l];
    const auto& mask = trace.masks[l];
    for (std::size_t k = 0; k < grad.values.size(); ++k) grad.values[k] *= mask.values[k];
    auto act = act_backward(net.config().activation, layer.srelu ? &*layer.srelu : nullptr,
                            trace.activation[l], grad);
    auto& lg = out.grads.hidden[l];
    lg.srelu = std::move(act.grad_params);
    sum_rows_into(act.grad_z, lg.bias);
    auto wg = layer.is_sparse()
                  ? sparse_backward(layer.sparse(), trace.layer_inputs[l], act.grad_z)
                  : dense_backward(std::get<DenseWeights>(layer.weights),
                                   trace.layer_inputs[l], act.grad_z);
    lg.weights = std::move(wg.grad_w);
    grad = std::move(wg.grad_x);
  }
  return out;
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'E', 'T', 'N', 'E', 'T', '0', '1'};

void put_dense(std::ostream& out, const DenseWeights& w) {
  detail::put<std::uint64_t>(out, w.n_in);
  detail::put<std::uint64_t>(out, w.n_out);
  detail::put_doubles(out, w.values);
}

DenseWeights get_dense(std::istream& in) {
  DenseWeights w;
  w.n_in = detail::get<std::uint64_t>(in);
  w.n_out = detail::get<std::uint64_t>(in);
  w.values = detail::get_doubles(in);
  if (w.values.size() != w.n_in * w.n_out) {
    throw std::runtime_error("checkpoint: dense matrix size mismatch");
  }
  w.momentum.assign(w.values.size(), 0.0);
  return w;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Network& net) {
  out.write(kCheckpointMagic, 8);
  detail::put_string(out, to_json(net.config_).dump());
  for (const auto& layer : net.hidden_) {
    detail::put<std::uint8_t>(out, layer.is_sparse() ? 0 : 1);
    if (layer.is_sparse()) write_snapshot(out, layer.sparse());
    else put_dense(out, std::get<DenseWeights>(layer.weights));
    detail::put_doubles(out, layer.bias);
    detail::put<std::uint8_t>(out, layer.srelu ? 1 : 0);
    if (layer.srelu) {
      detail::put_doubles(out, layer.srelu->t_r);
      detail::put_doubles(out, layer.srelu->a_r);
      detail::put_doubles(out, layer.srelu->t_l);
      detail::put_doubles(out, layer.srelu->a_l);
    }
  }
  put_dense(out, net.output_);
  detail::put_doubles(out, net.output_bias_);
  if (!out) throw std::runtime_error("save_checkpoint: stream failure");
}

Network load_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error("load_checkpoint: bad magic");
  }
  Network net;
  net.config_ = network_config_from_json(nlohmann::json::parse(detail::get_string(in)));
  net.config_.validate();
  const auto& dims = net.config_.layer_dims;
  for (std::size_t l = 0; l + 2 < dims.size(); ++l) {
    HiddenLayer layer;
    const auto kind = detail::get<std::uint8_t>(in);
    if (kind == 0) layer.weights = read_snapshot(in);
    else layer.weights = get_dense(in);
    if (layer.n_in() != dims[l] || layer.n_out() != dims[l + 1]) {
      throw std::runtime_error("load_checkpoint: layer " + std::to_string(l) +
                               " does not match config dims");
    }
    layer.bias = detail::get_doubles(in);
    layer.bias_velocity.assign(layer.bias.size(), 0.0);
    if (detail::get<std::uint8_t>(in) != 0) {
      SReLUParams p;
      p.t_r = detail::get_doubles(in);
      p.a_r = detail::get_doubles(in);
      p.t_l = detail::get_doubles(in);
      p.a_l = detail::get_doubles(in);
      if (!p.consistent() || p.size() != layer.n_out()) {
        throw std::runtime_error("load_checkpoint: malformed SReLU parameters");
      }
      layer.srelu_velocity = SReLUParams::zeros(p.size());
      layer.srelu = std::move(p);
    }
    net.hidden_.push_back(std::move(layer));
  }
  net.output_ = get_dense(in);
  net.output_bias_ = detail::get_doubles(in);
  net.output_bias_velocity_.assign(net.output_bias_.size(), 0.0);
  return net;
}

}  // namespace setnet
