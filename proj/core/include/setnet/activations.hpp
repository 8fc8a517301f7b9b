#pragma once

#include <array>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "setnet/dense_batch.hpp"

namespace setnet {

enum class ActivationKind { ReLU, Sigmoid, Tanh, Softplus, Softsign, SELU, SReLU };

inline constexpr std::array<ActivationKind, 7> kAllActivations = {
    ActivationKind::ReLU,     ActivationKind::Sigmoid, ActivationKind::Tanh,
    ActivationKind::Softplus, ActivationKind::Softsign, ActivationKind::SELU,
    ActivationKind::SReLU};

/// Lower-case name, as accepted by parse_activation.
std::string_view to_string(ActivationKind kind);

/// Case-insensitive; throws std::invalid_argument on unknown names.
ActivationKind parse_activation(std::string_view name);

inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

/// Per-neuron learnable SReLU parameters, structure-of-arrays.
///
///   f(x) = t_r + a_r (x - t_r)   if x >= t_r
///          x                     if t_l < x < t_r
///          t_l + a_l (x - t_l)   if x <= t_l
struct SReLUParams {
  std::vector<double> t_r, a_r, t_l, a_l;

  SReLUParams() = default;
  explicit SReLUParams(std::size_t neurons)
      : t_r(neurons, 0.0), a_r(neurons, 1.0), t_l(neurons, 0.0), a_l(neurons, 0.0) {}

  std::size_t size() const { return t_r.size(); }
  bool consistent() const;

  /// t_l = 0, a_l = 0, t_r ~ U[0, 1], a_r = 1.
  static SReLUParams initial(std::size_t neurons, std::mt19937_64& rng);
  /// All four parameter vectors zero (gradient / velocity buffers).
  static SReLUParams zeros(std::size_t neurons);

  friend bool operator==(const SReLUParams&, const SReLUParams&) = default;
};

/// Scalar forward/derivative; exposed for tests and tooling.
double activate(ActivationKind kind, double x);
double derivative(ActivationKind kind, double x);
double srelu(double x, double t_r, double a_r, double t_l, double a_l);
double srelu_derivative(double x, double t_r, double a_r, double t_l, double a_l);

struct ActivationState {
  DenseBatch pre_activation;
};

struct ActivationOutput {
  DenseBatch output;
  ActivationState state;
};

struct ActivationGradients {
  DenseBatch grad_z;
  std::optional<SReLUParams> grad_params;  ///< batch-summed, SReLU only
};

ActivationOutput act_forward(ActivationKind kind, const SReLUParams* params,
                             const DenseBatch& z);

ActivationGradients act_backward(ActivationKind kind, const SReLUParams* params,
                                 const ActivationState& state, const DenseBatch& grad_out);

}  // namespace setnet
