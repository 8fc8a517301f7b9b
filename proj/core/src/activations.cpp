#include "setnet/activations.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace setnet {

std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Softplus: return "softplus";
    case ActivationKind::Softsign: return "softsign";
    case ActivationKind::SELU: return "selu";
    case ActivationKind::SReLU: return "srelu";
  }
  return "unknown";
}

ActivationKind parse_activation(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto kind : kAllActivations) {
    if (to_string(kind) == lower) return kind;
  }
  throw std::invalid_argument("unknown activation '" + std::string(name) +
                              "' (expected relu, sigmoid, tanh, softplus, softsign, "
                              "selu or srelu)");
}

bool SReLUParams::consistent() const {
  const auto n = t_r.size();
  if (a_r.size() != n || t_l.size() != n || a_l.size() != n) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(t_r[i]) || !std::isfinite(a_r[i]) || !std::isfinite(t_l[i]) ||
        !std::isfinite(a_l[i])) {
      return false;
    }
  }
  return true;
}

SReLUParams SReLUParams::initial(std::size_t neurons, std::mt19937_64& rng) {
  SReLUParams p(neurons);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& t : p.t_r) t = unit(rng);
  return p;
}

SReLUParams SReLUParams::zeros(std::size_t neurons) {
  SReLUParams p(neurons);
  std::fill(p.a_r.begin(), p.a_r.end(), 0.0);
  return p;
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double activate(ActivationKind kind, double x) {
  switch (kind) {
    case ActivationKind::ReLU: return x > 0 ? x : 0.0;
    case ActivationKind::Sigmoid: return sigmoid(x);
    case ActivationKind::Tanh: return std::tanh(x);
    case ActivationKind::Softplus: return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    case ActivationKind::Softsign: return x / (1.0 + std::abs(x));
    case ActivationKind::SELU:
      return x > 0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
    case ActivationKind::SReLU:
      throw std::invalid_argument("activate: SReLU needs parameters, use srelu()");
  }
  return 0.0;
}

// At x == 0 the ReLU derivative is 0 (left piece); SELU uses the x <= 0 branch.
double derivative(ActivationKind kind, double x) {
  switch (kind) {
    case ActivationKind::ReLU: return x > 0 ? 1.0 : 0.0;
    case ActivationKind::Sigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case ActivationKind::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case ActivationKind::Softplus: return sigmoid(x);
    case ActivationKind::Softsign: {
      const double d = 1.0 + std::abs(x);
      return 1.0 / (d * d);
    }
    case ActivationKind::SELU:
      return x > 0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
    case ActivationKind::SReLU:
      throw std::invalid_argument("derivative: SReLU needs parameters");
  }
  return 0.0;
}

double srelu(double x, double t_r, double a_r, double t_l, double a_l) {
  if (x >= t_r) return t_r + a_r * (x - t_r);
  if (x <= t_l) return t_l + a_l * (x - t_l);
  return x;
}

double srelu_derivative(double x, double t_r, double a_r, double t_l, double a_l) {
  if (x >= t_r) return a_r;
  if (x <= t_l) return a_l;
  return 1.0;
}

ActivationOutput act_forward(ActivationKind kind, const SReLUParams* params,
                             const DenseBatch& z) {
  if (!z.all_finite()) throw std::domain_error("act_forward: non-finite input");
  ActivationOutput out{DenseBatch(z.rows, z.cols), ActivationState{z}};
  if (kind == ActivationKind::SReLU) {
    if (params == nullptr) throw std::invalid_argument("act_forward: SReLU without parameters");
    if (params->size() != z.cols || !params->consistent()) {
      throw std::invalid_argument("act_forward: SReLU has " +
                                  std::to_string(params->size()) + " neurons, batch has " +
                                  std::to_string(z.cols));
    }
    const auto& p = *params;
    for (std::size_t b = 0; b < z.rows; ++b) {
      for (std::size_t j = 0; j < z.cols; ++j) {
        out.output.at(b, j) = srelu(z.at(b, j), p.t_r[j], p.a_r[j], p.t_l[j], p.a_l[j]);
      }
    }
    return out;
  }
  std::transform(z.values.begin(), z.values.end(), out.output.values.begin(),
                 [kind](double x) { return activate(kind, x); });
  return out;
}

ActivationGradients act_backward(ActivationKind kind, const SReLUParams* params,
                                 const ActivationState& state, const DenseBatch& grad_out) {
  const auto& z = state.pre_activation;
  if (grad_out.rows != z.rows || grad_out.cols != z.cols) {
    throw std::invalid_argument("act_backward: grad_out does not match cached state");
  }
  ActivationGradients g{DenseBatch(z.rows, z.cols), std::nullopt};
  if (kind != ActivationKind::SReLU) {
    for (std::size_t k = 0; k < z.values.size(); ++k) {
      g.grad_z.values[k] = grad_out.values[k] * derivative(kind, z.values[k]);
    }
    return g;
  }
  if (params == nullptr || params->size() != z.cols) {
    throw std::invalid_argument("act_backward: SReLU parameters missing or mis-sized");
  }
  const auto& p = *params;
  auto grads = SReLUParams::zeros(z.cols);
  for (std::size_t b = 0; b < z.rows; ++b) {
    for (std::size_t j = 0; j < z.cols; ++j) {
      const double x = z.at(b, j);
      const double go = grad_out.at(b, j);
      if (x >= p.t_r[j]) {
        g.grad_z.at(b, j) = go * p.a_r[j];
        grads.a_r[j] += go * (x - p.t_r[j]);
        grads.t_r[j] += go * (1.0 - p.a_r[j]);
      } else if (x <= p.t_l[j]) {
        g.grad_z.at(b, j) = go * p.a_l[j];
        grads.a_l[j] += go * (x - p.t_l[j]);
        grads.t_l[j] += go * (1.0 - p.a_l[j]);
      } else {
        g.grad_z.at(b, j) = go;
      }
    }
  }
  g.grad_params = std::move(grads);
  return g;
}

}  // namespace setnet
