#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "setnet/network.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace setnet;

namespace {

NetworkConfig small_config(ActivationKind act, double sparsity, std::vector<std::size_t> dims) {
  NetworkConfig c;
  c.layer_dims = std::move(dims);
  c.activation = act;
  c.sparsity = sparsity;
  c.dropout_rate = 0.0;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  NetworkConfig c = small_config(ActivationKind::ReLU, 0.5, {4});
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.layer_dims = {4, 0, 2};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.layer_dims = {4, 3, 2};
  c.sparsity = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.sparsity = 0.5;
  c.dropout_rate = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.dropout_rate = 0.3;
  CHECK_NOTHROW(c.validate());
  CHECK(c.sparse_hidden());
  c.sparsity = 0.0;
  CHECK_FALSE(c.sparse_hidden());
}

TEST_CASE("3072-4000-1000-4000-10 at 98.85% has three sparse hidden layers of the expected size") {
  NetworkConfig c;
  c.sparsity = 0.9885;
  std::mt19937_64 rng(1);
  const Network net(c, rng);
  REQUIRE(net.hidden().size() == 3);
  CHECK(net.hidden()[0].weight_count() == 141312);
  CHECK(net.hidden()[1].weight_count() == 46000);
  CHECK(net.hidden()[2].weight_count() == 46000);
  CHECK(net.output().values.size() == 40000);
}

TEST_CASE("probabilities sum to one and eval is deterministic") {
  std::mt19937_64 rng(2);
  NetworkConfig c = small_config(ActivationKind::Tanh, 0.5, {8, 6, 5, 4});
  c.dropout_rate = 0.3;
  const Network net(c, rng);
  const auto x = oracle::random_batch(7, 8, rng);
  const auto a = forward(net, x, false);
  const auto b = forward(net, x, false);
  CHECK(a.probs == b.probs);
  for (const auto& m : a.trace.masks)
    for (double v : m.values) CHECK(v == 1.0);
  for (std::size_t r = 0; r < 7; ++r) {
    double s = 0.0;
    for (double p : a.probs.row(r)) s += p;
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
  std::mt19937_64 drop(3);
  const auto t = forward(net, x, true, &drop);
  for (std::size_t r = 0; r < 7; ++r) {
    double s = 0.0;
    for (double p : t.probs.row(r)) s += p;
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
  CHECK_THROWS_AS(forward(net, x, true, nullptr), std::invalid_argument);
  CHECK_THROWS_AS(forward(net, DenseBatch(1, 7), false), std::invalid_argument);
}

TEST_CASE("softmax stays finite on huge logits") {
  const auto p = softmax(DenseBatch(1, 3, {1000.0, 1000.0, -1000.0}));
  CHECK(p.values[0] == doctest::Approx(0.5));
  CHECK(p.values[2] == 0.0);
}

TEST_CASE("2-2-2 network by hand") {
  std::mt19937_64 rng(4);
  Network net(small_config(ActivationKind::ReLU, 0.0, {2, 2, 2}), rng);
  auto& w1 = std::get<DenseWeights>(net.hidden()[0].weights);
  w1.values = {1.0, -1.0, 0.5, 2.0};
  net.hidden()[0].bias = {0.5, -4.0};
  net.output().values = {1.0, 0.0, 0.0, 1.0};
  net.output_bias() = {0.0, 0.0};
  const DenseBatch x(1, 2, {1.0, 2.0});
  // z = [1 + 1, -1 + 4] + bias = [2.5, -1]; relu -> [2.5, 0]; logits [2.5, 0].
  const auto r = forward(net, x, false);
  CHECK(r.trace.logits.values == std::vector<double>{2.5, 0.0});
  const double p0 = 1.0 / (1.0 + std::exp(-2.5));
  CHECK(r.probs.values[0] == doctest::Approx(p0));
  const DenseBatch y(1, 2, {0.0, 1.0});
  const auto lg = loss_and_backward(net, r.trace, r.probs, y);
  CHECK(lg.loss == doctest::Approx(-std::log(1.0 - p0)));
  // dlogits = p - y = [p0, -p0]; output grads = h^T dlogits.
  CHECK(lg.grads.output_bias[0] == doctest::Approx(p0));
  CHECK(lg.grads.output_bias[1] == doctest::Approx(-p0));
  CHECK(lg.grads.output_weights[0] == doctest::Approx(2.5 * p0));
  CHECK(lg.grads.output_weights[2] == 0.0);
  // Back to hidden: grad_h = W2 dlogits = [p0, -p0]; relu gate kills unit 1.
  CHECK(lg.grads.hidden[0].bias[0] == doctest::Approx(p0));
  CHECK(lg.grads.hidden[0].bias[1] == 0.0);
  CHECK(lg.grads.hidden[0].weights[0] == doctest::Approx(p0));
  CHECK(lg.grads.hidden[0].weights[2] == doctest::Approx(2.0 * p0));
}

TEST_CASE("cross-entropy reference values") {
  const DenseBatch y(2, 3, {1, 0, 0, 0, 0, 1});
  CHECK(cross_entropy(y, y) == 0.0);
  const DenseBatch y10(1, 10, {0, 0, 0, 1, 0, 0, 0, 0, 0, 0});
  CHECK(cross_entropy(DenseBatch(1, 10, 0.1), y10) == doctest::Approx(std::log(10.0)));
  // Clamped: probability 0 on the true class.
  CHECK(cross_entropy(DenseBatch(1, 2, {1.0, 0.0}), DenseBatch(1, 2, {0.0, 1.0})) ==
        doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(cross_entropy(y, DenseBatch(2, 3, {1, 1, 0, 0, 0, 1})), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy(y, DenseBatch(2, 3, {0.5, 0.5, 0, 0, 0, 1})), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy(y, DenseBatch(2, 3, {0, 0, 0, 0, 0, 1})), std::invalid_argument);
}

TEST_CASE("full-network gradients match finite differences for every activation") {
  for (auto kind : kAllActivations) {
    for (double s : {0.0, 0.4}) {
      CAPTURE(to_string(kind));
      CAPTURE(s);
      std::mt19937_64 rng(100 + static_cast<int>(kind));
      Network net(small_config(kind, s, {6, 4, 3, 4, 2}), rng);
      oracle::spread_srelu(net, rng);
      oracle::jitter_biases(net, rng);
      const auto x = oracle::random_batch(5, 6, rng);
      const auto y = oracle::random_labels(5, 2, rng);
      const auto r = oracle::check_gradients(net, x, y);
      CHECK(r.parameters > 0);
      CHECK(r.max_relative_error <= 1e-4);
    }
  }
}

TEST_CASE("sparse storage at sparsity 0 matches the dense path") {
  std::mt19937_64 rng(11);
  auto sc = small_config(ActivationKind::SReLU, 0.0, {5, 4, 3, 2});
  sc.storage = HiddenStorage::Sparse;
  Network sparse(sc, rng);
  oracle::spread_srelu(sparse, rng);
  REQUIRE(sparse.hidden()[0].is_sparse());
  REQUIRE(sparse.hidden()[0].weight_count() == 20);

  std::mt19937_64 rng2(12);
  Network dense(small_config(ActivationKind::SReLU, 0.0, {5, 4, 3, 2}), rng2);
  REQUIRE_FALSE(dense.hidden()[0].is_sparse());
  for (std::size_t l = 0; l < 2; ++l) {
    std::get<DenseWeights>(dense.hidden()[l].weights).values = sparse.hidden()[l].sparse().to_dense();
    dense.hidden()[l].bias = sparse.hidden()[l].bias;
    dense.hidden()[l].srelu = sparse.hidden()[l].srelu;
  }
  dense.output() = sparse.output();
  dense.output_bias() = sparse.output_bias();

  const auto x = oracle::random_batch(4, 5, rng);
  const auto y = oracle::random_labels(4, 2, rng);
  const auto fs = forward(sparse, x, false);
  const auto fd = forward(dense, x, false);
  for (std::size_t k = 0; k < fs.probs.values.size(); ++k) {
    CHECK(std::abs(fs.probs.values[k] - fd.probs.values[k]) <= 1e-12);
  }
  const auto gs = oracle::flatten(loss_and_backward(sparse, fs.trace, fs.probs, y).grads);
  const auto gd = oracle::flatten(loss_and_backward(dense, fd.trace, fd.probs, y).grads);
  REQUIRE(gs.size() == gd.size());
  for (std::size_t k = 0; k < gs.size(); ++k) CHECK(std::abs(gs[k] - gd[k]) <= 1e-12);
}

TEST_CASE("inverted dropout preserves the expected activation") {
  std::mt19937_64 rng(21);
  auto c = small_config(ActivationKind::ReLU, 0.0, {3, 50, 2});
  c.dropout_rate = 0.3;
  const Network net(c, rng);
  const auto x = oracle::random_batch(200, 3, rng);
  std::mt19937_64 drop(22);
  const auto r = forward(net, x, true, &drop);
  const auto& mask = r.trace.masks[0];
  // 10^4 mask entries, each 0 or 1/0.7; mean 1, variance p/(1-p).
  REQUIRE(mask.values.size() == 10000);
  double sum = 0.0, zeros = 0.0;
  for (double m : mask.values) {
    CHECK((m == 0.0 || std::abs(m - 1.0 / 0.7) < 1e-15));
    sum += m;
    zeros += m == 0.0;
  }
  const double n = 10000.0;
  const double sigma = std::sqrt(0.3 / 0.7 / n);
  CHECK(std::abs(sum / n - 1.0) <= 3 * sigma);
  CHECK(std::abs(zeros / n - 0.3) <= 3 * std::sqrt(0.3 * 0.7 / n));
}

TEST_CASE("checkpoint round-trip reproduces the forward pass") {
  for (double s : {0.0, 0.6}) {
    std::mt19937_64 rng(31);
    Network net(small_config(ActivationKind::SReLU, s, {6, 5, 4, 3}), rng);
    oracle::spread_srelu(net, rng);
    std::stringstream buf;
    save_checkpoint(buf, net);
    const auto back = load_checkpoint(buf);
    CHECK(back.config().layer_dims == net.config().layer_dims);
    CHECK(back.config().activation == ActivationKind::SReLU);
    const auto x = oracle::random_batch(3, 6, rng);
    CHECK(forward(back, x, false).probs == forward(net, x, false).probs);
  }
  std::stringstream bad("NOTANET!");
  CHECK_THROWS(load_checkpoint(bad));
}
