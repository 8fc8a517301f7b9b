#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "setnet/set_evolution.hpp"
#include "support/oracles.hpp"

using namespace setnet;

namespace {

std::set<std::pair<std::uint32_t, std::uint32_t>> positions(const SparseWeights& w) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> s;
  for (const auto& c : w.connections()) s.insert({c.row, c.col});
  return s;
}

}  // namespace

TEST_CASE("sparsity levels") {
  CHECK(SparsityLevel(0.9885).label() == "98.85");
  CHECK(SparsityLevel(0.885).label() == "88.50");
  CHECK(SparsityLevel(0.0).label() == "dense");
  CHECK(SparsityLevel(0.0).is_dense());
  CHECK_THROWS_AS(SparsityLevel(1.0), std::invalid_argument);
  CHECK_THROWS_AS(SparsityLevel(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(SparsityLevel(NAN), std::invalid_argument);
  const auto levels = default_sparsity_levels();
  REQUIRE(levels.size() == 6);
  CHECK(levels.front().sparsity() == 0.9885);
  CHECK(levels.back().is_dense());
}

TEST_CASE("epsilon from sparsity") {
  CHECK(epsilon_from_sparsity(SparsityLevel(0.9885), 4000, 1000) == doctest::Approx(9.2));
  CHECK(epsilon_from_sparsity(SparsityLevel(0.0), 4000, 1000) == doctest::Approx(800.0));
  CHECK(epsilon_from_sparsity(SparsityLevel(0.712), 3072, 4000) ==
        doctest::Approx(0.288 * 3072.0 * 4000.0 / 7072.0));
  CHECK(std::abs(epsilon_from_sparsity(SparsityLevel(0.712), 3072, 4000) - 500.4) < 0.05);
  CHECK_THROWS_AS(epsilon_from_sparsity(SparsityLevel(0.5), 0, 4), std::invalid_argument);
}

TEST_CASE("parameter counts of the reference architecture") {
  struct Row {
    double s;
    std::size_t l1, l2, l3;
  };
  const Row table[] = {{0.9885, 141312, 46000, 46000},    {0.9712, 353895, 115200, 115200},
                       {0.9425, 706560, 230000, 230000},  {0.8850, 1413120, 460000, 460000},
                       {0.7120, 3538944, 1152000, 1152000}, {0.0, 12288000, 4000000, 4000000}};
  for (const auto& r : table) {
    CAPTURE(r.s);
    CHECK(expected_param_count(SparsityLevel(r.s), 3072, 4000) == r.l1);
    CHECK(expected_param_count(SparsityLevel(r.s), 4000, 1000) == r.l2);
    CHECK(expected_param_count(SparsityLevel(r.s), 1000, 4000) == r.l3);
  }
}

TEST_CASE("init_sparse_layer realizes the exact count with distinct positions") {
  std::mt19937_64 rng(5);
  for (double s : {0.9885, 0.9, 0.5, 0.1}) {
    const auto w = init_sparse_layer(SparsityLevel(s), 60, 40, rng);
    CHECK(w.nnz() == expected_param_count(SparsityLevel(s), 60, 40));
    CHECK(positions(w).size() == w.nnz());
    const double h = init_half_width(60, 40);
    for (double v : w.weights()) {
      CHECK(std::abs(v) <= h);
    }
    for (double m : w.momentum()) CHECK(m == 0.0);
  }
  const auto w = init_sparse_layer(SparsityLevel(0.9885), 1000, 4000, rng);
  CHECK(w.nnz() == 46000);
}

TEST_CASE("init_sparse_layer is deterministic per seed") {
  std::mt19937_64 a(99), b(99), c(100);
  const auto wa = init_sparse_layer(SparsityLevel(0.8), 30, 20, a);
  const auto wb = init_sparse_layer(SparsityLevel(0.8), 30, 20, b);
  const auto wc = init_sparse_layer(SparsityLevel(0.8), 30, 20, c);
  CHECK(wa == wb);
  CHECK(positions(wa) != positions(wc));
}

TEST_CASE("init occupancy is uniform over cells") {
  // 4x5 matrix, 6 connections, 10^4 seeds: each cell occupied with p = 6/20.
  constexpr int kSeeds = 10000;
  constexpr std::size_t kIn = 4, kOut = 5;
  const SparsityLevel level(1.0 - 6.0 / 20.0);
  REQUIRE(expected_param_count(level, kIn, kOut) == 6);
  std::vector<int> hits(kIn * kOut, 0);
  for (int s = 0; s < kSeeds; ++s) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(s) * 7919 + 1);
    for (const auto& c : init_sparse_layer(level, kIn, kOut, rng).connections()) {
      ++hits[c.row * kOut + c.col];
    }
  }
  const double p = 0.3, mean = kSeeds * p, sigma = std::sqrt(kSeeds * p * (1 - p));
  for (int h : hits) CHECK(std::abs(h - mean) <= 4 * sigma);
}

TEST_CASE("evolve prunes the smallest magnitudes") {
  const auto w = SparseWeights::from_connections(
      1, 5, {{0, 0, 0.5}, {0, 1, -0.01}, {0, 2, 0.2}, {0, 3, -0.3}, {0, 4, 0.05}});
  std::mt19937_64 rng(1);
  EvolutionConfig cfg;
  cfg.zeta = 0.4;
  const auto r = evolve(w, cfg, rng);
  REQUIRE(r.pruned.size() == 2);
  std::vector<double> pw{r.pruned[0].weight, r.pruned[1].weight};
  std::sort(pw.begin(), pw.end());
  CHECK(pw == std::vector<double>{-0.01, 0.05});
  // The only empty cells before the step were none, so regrowth has a shortfall.
  CHECK(r.regrown.empty());
  CHECK(r.shortfall == 2);
  CHECK(r.weights.nnz() == 3);
}

TEST_CASE("evolve with k = 0 returns the layer unchanged") {
  const auto w = SparseWeights::from_connections(3, 3, {{0, 0, 0.5}, {1, 2, 0.1}});
  std::mt19937_64 rng(2);
  const auto r = evolve(w, EvolutionConfig{}, rng);
  CHECK(r.pruned.empty());
  CHECK(r.regrown.empty());
  CHECK(r.weights == w);
}

TEST_CASE("evolve ties are broken by storage order") {
  const auto w = SparseWeights::from_connections(
      3, 3, {{0, 0, 0.1}, {0, 1, -0.1}, {1, 0, 0.1}, {2, 2, 0.9}});
  std::mt19937_64 rng(3);
  EvolutionConfig cfg;
  cfg.zeta = 0.5;
  const auto r = evolve(w, cfg, rng);
  REQUIRE(r.pruned.size() == 2);
  CHECK(r.pruned[0].row == 0);
  CHECK(r.pruned[0].col == 0);
  CHECK(r.pruned[1].row == 0);
  CHECK(r.pruned[1].col == 1);
}

TEST_CASE("evolve properties on random layers") {
  std::mt19937_64 rng(17);
  EvolutionConfig cfg;
  cfg.zeta = 0.3;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n_in = 5 + trial % 13, n_out = 3 + trial % 11;
    auto w = init_sparse_layer(SparsityLevel(0.6), n_in, n_out, rng);
    for (auto& m : w.momentum()) m = 1.5;
    const auto before = positions(w);
    const auto r = evolve(w, cfg, rng);
    CHECK(r.shortfall == 0);
    CHECK(r.weights.nnz() == w.nnz());
    CHECK(r.pruned.size() == static_cast<std::size_t>(std::floor(cfg.zeta * w.nnz())));
    CHECK(r.regrown.size() == r.pruned.size());
    double max_pruned = 0.0;
    for (const auto& c : r.pruned) max_pruned = std::max(max_pruned, std::abs(c.weight));
    auto survivors = before;
    for (const auto& c : r.pruned) survivors.erase({c.row, c.col});
    for (const auto& c : r.regrown) {
      CHECK(before.count({c.row, c.col}) == 0);
      CHECK(c.momentum == 0.0);
      CHECK(std::abs(c.weight) <= init_half_width(n_in, n_out));
    }
    for (const auto& c : r.weights.connections()) {
      if (survivors.count({c.row, c.col})) {
        CHECK(std::abs(c.weight) >= max_pruned);
        CHECK(c.momentum == 1.5);
      }
    }
    CHECK(positions(r.weights).size() == r.weights.nnz());
  }
}

TEST_CASE("evolve on a nearly full layer reports the shortfall") {
  std::mt19937_64 rng(4);
  // 10x10 with 95 connections: 5 empty cells, k = floor(0.3 * 95) = 28.
  auto w = init_sparse_layer(SparsityLevel(0.05), 10, 10, rng);
  REQUIRE(w.nnz() == 95);
  const auto r = evolve(w, EvolutionConfig{}, rng);
  CHECK(r.pruned.size() == 28);
  CHECK(r.regrown.size() == 5);
  CHECK(r.shortfall == 23);
  CHECK(r.weights.nnz() == 95 - 23);
}

TEST_CASE("evolution config validation") {
  EvolutionConfig cfg;
  cfg.zeta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.zeta = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.zeta = 0.3;
  cfg.regrow_half_width = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(evolve(SparseWeights(3, 3), EvolutionConfig{}, rng), std::invalid_argument);
}

TEST_CASE("dense layer initialization") {
  std::mt19937_64 rng(6);
  const auto d = init_dense_layer(8, 4, rng);
  CHECK(d.values.size() == 32);
  CHECK(d.momentum.size() == 32);
  for (double v : d.values) CHECK(std::abs(v) <= init_half_width(8, 4));
}
