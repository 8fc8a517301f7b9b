#include "setnet/set_evolution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace setnet {

SparsityLevel::SparsityLevel(double sparsity) : sparsity_(sparsity) {
  if (!(sparsity >= 0.0 && sparsity < 1.0)) {
    throw std::invalid_argument("sparsity must be in [0, 1), got " + std::to_string(sparsity));
  }
}

std::string SparsityLevel::label() const {
  if (is_dense()) return "dense";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", sparsity_ * 100.0);
  return buf;
}

std::vector<SparsityLevel> default_sparsity_levels() {
  return {SparsityLevel(0.9885), SparsityLevel(0.9712), SparsityLevel(0.9425),
          SparsityLevel(0.8850), SparsityLevel(0.7120), SparsityLevel(0.0)};
}

void EvolutionConfig::validate() const {
  if (!(zeta > 0.0 && zeta < 1.0)) {
    throw std::invalid_argument("zeta must be in (0, 1), got " + std::to_string(zeta));
  }
  if (regrow_half_width && !(*regrow_half_width > 0.0)) {
    throw std::invalid_argument("regrow half-width must be positive");
  }
}

namespace {

void require_dims(std::size_t n_l, std::size_t n_l1) {
  if (n_l == 0 || n_l1 == 0) {
    throw std::invalid_argument("layer dimensions must be positive");
  }
}

// Bit-per-cell occupancy map over an n_in x n_out matrix.
class CellMap {
 public:
  explicit CellMap(std::size_t cells) : bits_((cells + 63) / 64, 0) {}
  bool test(std::size_t c) const { return (bits_[c >> 6] >> (c & 63)) & 1u; }
  void set(std::size_t c) { bits_[c >> 6] |= std::uint64_t{1} << (c & 63); }

  // Ascending cells whose bit equals `value`, among the first `cells`.
  template <typename F>
  void for_each(bool value, std::size_t cells, F&& f) const {
    for (std::size_t w = 0; w < bits_.size(); ++w) {
      std::uint64_t word = value ? bits_[w] : ~bits_[w];
      while (word) {
        const std::size_t c = (w << 6) + static_cast<std::size_t>(std::countr_zero(word));
        if (c >= cells) return;
        f(c);
        word &= word - 1;
      }
    }
  }

 private:
  std::vector<std::uint64_t> bits_;
};

// Uniform m-subset of [0, n) by Floyd's algorithm, returned ascending.
std::vector<std::size_t> sample_cells(std::size_t n, std::size_t m, std::mt19937_64& rng) {
  std::vector<std::size_t> out;
  out.reserve(m);
  if (m == n) {
    out.resize(n);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  // Drawing the smaller of the subset and its complement keeps this
  // O(min(m, n - m)) draws; either way the result is a uniform m-subset.
  const bool complement = m > n / 2;
  const std::size_t draws = complement ? n - m : m;
  CellMap chosen(n);
  for (std::size_t j = n - draws; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    chosen.set(chosen.test(t) ? j : t);
  }
  chosen.for_each(!complement, n, [&](std::size_t c) { out.push_back(c); });
  return out;
}

}  // namespace

double epsilon_from_sparsity(SparsityLevel level, std::size_t n_l, std::size_t n_l1) {
  require_dims(n_l, n_l1);
  const double nl = static_cast<double>(n_l);
  const double nl1 = static_cast<double>(n_l1);
  return level.density() * (nl * nl1) / (nl + nl1);
}

std::size_t expected_param_count(SparsityLevel level, std::size_t n_l, std::size_t n_l1) {
  require_dims(n_l, n_l1);
  const long double cells = static_cast<long double>(n_l) * static_cast<long double>(n_l1);
  const long double exact = static_cast<long double>(level.density()) * cells;
  const long double nearest = std::round(exact);
  long double count = std::abs(exact - nearest) <= 1e-9L * std::max(1.0L, exact)
                          ? nearest
                          : std::ceil(exact);
  count = std::min(count, cells);
  return static_cast<std::size_t>(count);
}

double init_half_width(std::size_t n_in, std::size_t n_out) {
  require_dims(n_in, n_out);
  return std::sqrt(6.0 / static_cast<double>(n_in + n_out));
}

SparseWeights init_sparse_layer(SparsityLevel level, std::size_t n_l, std::size_t n_l1,
                                std::mt19937_64& rng) {
  const std::size_t count = expected_param_count(level, n_l, n_l1);
  const std::size_t cells = n_l * n_l1;
  if (count > cells) {
    throw std::invalid_argument("requested " + std::to_string(count) +
                                " connections exceed capacity " + std::to_string(cells));
  }
  const auto positions = sample_cells(cells, count, rng);
  std::uniform_real_distribution<double> init(-init_half_width(n_l, n_l1),
                                              init_half_width(n_l, n_l1));
  std::vector<Connection> conns;
  conns.reserve(count);
  for (const auto cell : positions) {
    conns.push_back({static_cast<std::uint32_t>(cell / n_l1),
                     static_cast<std::uint32_t>(cell % n_l1), init(rng), 0.0});
  }
  return SparseWeights::from_connections(n_l, n_l1, std::move(conns));
}

DenseWeights init_dense_layer(std::size_t n_in, std::size_t n_out, std::mt19937_64& rng) {
  DenseWeights w(n_in, n_out);
  const double h = init_half_width(n_in, n_out);
  std::uniform_real_distribution<double> init(-h, h);
  for (auto& v : w.values) v = init(rng);
  return w;
}

EvolveResult evolve(const SparseWeights& w, const EvolutionConfig& cfg,
                    std::mt19937_64& rng) {
  cfg.validate();
  if (w.nnz() == 0) throw std::invalid_argument("evolve: layer has no connections");

  const std::size_t nnz = w.nnz();
  const auto k = static_cast<std::size_t>(std::floor(cfg.zeta * static_cast<double>(nnz)));
  EvolveResult result;
  if (k == 0) {
    result.weights = w;
    return result;
  }

  const auto weights = w.weights();
  std::vector<std::size_t> order(nnz);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto smaller = [&](std::size_t a, std::size_t b) {
    const double ma = std::abs(weights[a]);
    const double mb = std::abs(weights[b]);
    return ma != mb ? ma < mb : a < b;
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   order.end(), smaller);
  std::vector<bool> drop(nnz, false);
  for (std::size_t r = 0; r < k; ++r) drop[order[r]] = true;

  const std::size_t n_out = w.n_out();
  const std::size_t cells = w.capacity();
  CellMap occupied(cells);
  std::vector<Connection> kept;
  kept.reserve(nnz);
  for (const auto& c : w.connections()) {
    occupied.set(static_cast<std::size_t>(c.row) * n_out + c.col);
  }
  {
    const auto all = w.connections();
    for (std::size_t idx = 0; idx < nnz; ++idx) {
      (drop[idx] ? result.pruned : kept).push_back(all[idx]);
    }
  }

  const std::size_t pool = cells - nnz;
  const std::size_t grow = std::min(k, pool);
  result.shortfall = k - grow;

  std::vector<std::size_t> fresh;
  fresh.reserve(grow);
  if (pool >= 2 * grow && pool * 2 >= cells) {
    // Mostly empty: rejection sampling over all cells.
    std::uniform_int_distribution<std::size_t> any(0, cells - 1);
    while (fresh.size() < grow) {
      const std::size_t c = any(rng);
      if (occupied.test(c)) continue;
      occupied.set(c);
      fresh.push_back(c);
    }
  } else {
    std::vector<std::size_t> empty;
    empty.reserve(pool);
    occupied.for_each(false, cells, [&](std::size_t c) { empty.push_back(c); });
    for (std::size_t r = 0; r < grow; ++r) {
      const std::size_t pick =
          std::uniform_int_distribution<std::size_t>(r, empty.size() - 1)(rng);
      std::swap(empty[r], empty[pick]);
      fresh.push_back(empty[r]);
    }
  }

  const double h = cfg.regrow_half_width.value_or(init_half_width(w.n_in(), n_out));
  std::uniform_real_distribution<double> init(-h, h);
  result.regrown.reserve(grow);
  for (const auto c : fresh) {
    result.regrown.push_back({static_cast<std::uint32_t>(c / n_out),
                              static_cast<std::uint32_t>(c % n_out), init(rng), 0.0});
  }
  kept.insert(kept.end(), result.regrown.begin(), result.regrown.end());
  result.weights = SparseWeights::from_connections(w.n_in(), n_out, std::move(kept));
  return result;
}

}  // namespace setnet
