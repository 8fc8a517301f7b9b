#include "setnet/sparse_weights.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"

namespace setnet {

DenseBatch::DenseBatch(std::size_t r, std::size_t c, std::vector<double> v)
    : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) {
    throw std::invalid_argument("DenseBatch: " + std::to_string(values.size()) +
                                " values for " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
}

bool DenseBatch::all_finite() const {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

DenseBatch gather_rows(const DenseBatch& src, std::span<const std::size_t> indices) {
  DenseBatch out(indices.size(), src.cols);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto in = src.row(indices[r]);
    std::copy(in.begin(), in.end(), out.row(r).begin());
  }
  return out;
}

SparseWeights::SparseWeights(std::size_t n_in, std::size_t n_out)
    : n_in_(n_in), n_out_(n_out), row_offsets_(n_in + 1, 0) {}

SparseWeights SparseWeights::from_connections(std::size_t n_in, std::size_t n_out,
                                              std::vector<Connection> connections) {
  const auto before = [](const Connection& a, const Connection& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  };
  if (!std::is_sorted(connections.begin(), connections.end(), before)) {
    std::sort(connections.begin(), connections.end(), before);
  }
  SparseWeights w(n_in, n_out);
  w.cols_.reserve(connections.size());
  w.weights_.reserve(connections.size());
  w.momentum_.reserve(connections.size());
  for (std::size_t k = 0; k < connections.size(); ++k) {
    const auto& c = connections[k];
    if (c.row >= n_in || c.col >= n_out) {
      throw std::invalid_argument("connection (" + std::to_string(c.row) + ", " +
                                  std::to_string(c.col) + ") outside " +
                                  std::to_string(n_in) + "x" + std::to_string(n_out));
    }
    if (k > 0 && connections[k - 1].row == c.row && connections[k - 1].col == c.col) {
      throw std::invalid_argument("duplicate connection (" + std::to_string(c.row) +
                                  ", " + std::to_string(c.col) + ")");
    }
    ++w.row_offsets_[c.row + 1];
    w.cols_.push_back(c.col);
    w.weights_.push_back(c.weight);
    w.momentum_.push_back(c.momentum);
  }
  for (std::size_t i = 0; i < n_in; ++i) w.row_offsets_[i + 1] += w.row_offsets_[i];
  return w;
}

std::uint32_t SparseWeights::row_of(std::size_t k) const {
  const auto it = std::upper_bound(row_offsets_.begin(), row_offsets_.end(), k);
  return static_cast<std::uint32_t>(std::distance(row_offsets_.begin(), it) - 1);
}

std::vector<Connection> SparseWeights::connections() const {
  std::vector<Connection> out;
  out.reserve(nnz());
  for (std::size_t i = 0; i < n_in_; ++i) {
    for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
      out.push_back({static_cast<std::uint32_t>(i), cols_[k], weights_[k], momentum_[k]});
    }
  }
  return out;
}

std::vector<double> SparseWeights::to_dense() const {
  std::vector<double> dense(n_in_ * n_out_, 0.0);
  for (std::size_t i = 0; i < n_in_; ++i) {
    for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
      dense[i * n_out_ + cols_[k]] = weights_[k];
    }
  }
  return dense;
}

namespace {

std::string dims(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void check_input(std::size_t n_in, std::size_t n_out, const DenseBatch& x,
                 const char* op) {
  if (x.cols != n_in) {
    throw std::invalid_argument(std::string(op) + ": input " + dims(x.rows, x.cols) +
                                " does not match weights " + dims(n_in, n_out));
  }
}

void check_grad(std::size_t n_in, std::size_t n_out, const DenseBatch& x,
                const DenseBatch& grad_out, const char* op) {
  check_input(n_in, n_out, x, op);
  if (grad_out.cols != n_out || grad_out.rows != x.rows) {
    throw std::invalid_argument(std::string(op) + ": grad_out " +
                                dims(grad_out.rows, grad_out.cols) + " expected " +
                                dims(x.rows, n_out));
  }
}

}  // namespace

DenseBatch sparse_forward(const SparseWeights& w, const DenseBatch& x) {
  check_input(w.n_in(), w.n_out(), x, "sparse_forward");
  DenseBatch out(x.rows, w.n_out());
  const auto offsets = w.row_offsets();
  const auto cols = w.cols();
  const auto weights = w.weights();
  for (std::size_t b = 0; b < x.rows; ++b) {
    const auto in = x.row(b);
    double* dst = out.row(b).data();
    for (std::size_t i = 0; i < w.n_in(); ++i) {
      const double xi = in[i];
      if (xi == 0.0) continue;
      for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
        dst[cols[k]] += xi * weights[k];
      }
    }
  }
  return out;
}

WeightGradients sparse_backward(const SparseWeights& w, const DenseBatch& x,
                                const DenseBatch& grad_out) {
  check_grad(w.n_in(), w.n_out(), x, grad_out, "sparse_backward");
  WeightGradients g{std::vector<double>(w.nnz(), 0.0), DenseBatch(x.rows, w.n_in())};
  const auto offsets = w.row_offsets();
  const auto cols = w.cols();
  const auto weights = w.weights();
  for (std::size_t b = 0; b < x.rows; ++b) {
    const auto in = x.row(b);
    const auto go = grad_out.row(b);
    auto gx = g.grad_x.row(b);
    for (std::size_t i = 0; i < w.n_in(); ++i) {
      const double xi = in[i];
      double acc = 0.0;
      for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
        const double gj = go[cols[k]];
        g.grad_w[k] += xi * gj;
        acc += weights[k] * gj;
      }
      gx[i] = acc;
    }
  }
  return g;
}

DenseBatch dense_forward(const DenseWeights& w, const DenseBatch& x) {
  check_input(w.n_in, w.n_out, x, "dense_forward");
  DenseBatch out(x.rows, w.n_out);
  for (std::size_t b = 0; b < x.rows; ++b) {
    const auto in = x.row(b);
    double* dst = out.row(b).data();
    for (std::size_t i = 0; i < w.n_in; ++i) {
      const double xi = in[i];
      if (xi == 0.0) continue;
      const double* wrow = w.values.data() + i * w.n_out;
      for (std::size_t j = 0; j < w.n_out; ++j) dst[j] += xi * wrow[j];
    }
  }
  return out;
}

WeightGradients dense_backward(const DenseWeights& w, const DenseBatch& x,
                               const DenseBatch& grad_out) {
  check_grad(w.n_in, w.n_out, x, grad_out, "dense_backward");
  WeightGradients g{std::vector<double>(w.n_in * w.n_out, 0.0),
                    DenseBatch(x.rows, w.n_in)};
  for (std::size_t b = 0; b < x.rows; ++b) {
    const auto in = x.row(b);
    const auto go = grad_out.row(b);
    auto gx = g.grad_x.row(b);
    for (std::size_t i = 0; i < w.n_in; ++i) {
      const double xi = in[i];
      const double* wrow = w.values.data() + i * w.n_out;
      double* gw = g.grad_w.data() + i * w.n_out;
      double acc = 0.0;
      for (std::size_t j = 0; j < w.n_out; ++j) {
        gw[j] += xi * go[j];
        acc += wrow[j] * go[j];
      }
      gx[i] = acc;
    }
  }
  return g;
}

double density(const SparseWeights& w) {
  if (w.n_in() == 0 || w.n_out() == 0) {
    throw std::invalid_argument("density of a zero-dimension matrix " +
                                dims(w.n_in(), w.n_out()));
  }
  return static_cast<double>(w.nnz()) / static_cast<double>(w.capacity());
}

double sparsity(const SparseWeights& w) { return 1.0 - density(w); }

namespace {
constexpr char kSnapshotMagic[4] = {'S', 'P', 'W', 'T'};
constexpr std::uint32_t kSnapshotVersion = 1;
}  // namespace

void write_snapshot(std::ostream& out, const SparseWeights& w) {
  out.write(kSnapshotMagic, 4);
  detail::put<std::uint32_t>(out, kSnapshotVersion);
  detail::put<std::uint64_t>(out, w.n_in());
  detail::put<std::uint64_t>(out, w.n_out());
  detail::put<std::uint64_t>(out, w.nnz());
  for (const auto& c : w.connections()) {
    detail::put<std::uint64_t>(out, c.row);
    detail::put<std::uint64_t>(out, c.col);
    detail::put<double>(out, c.weight);
  }
  if (!out) throw std::runtime_error("write_snapshot: stream failure");
}

SparseWeights read_snapshot(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kSnapshotMagic, 4) != 0) {
    throw std::runtime_error("read_snapshot: bad magic");
  }
  if (detail::get<std::uint32_t>(in) != kSnapshotVersion) {
    throw std::runtime_error("read_snapshot: unsupported version");
  }
  const auto n_in = detail::get<std::uint64_t>(in);
  const auto n_out = detail::get<std::uint64_t>(in);
  const auto nnz = detail::get<std::uint64_t>(in);
  if (nnz > n_in * n_out) throw std::runtime_error("read_snapshot: nnz exceeds capacity");
  std::vector<Connection> conns(nnz);
  for (auto& c : conns) {
    c.row = static_cast<std::uint32_t>(detail::get<std::uint64_t>(in));
    c.col = static_cast<std::uint32_t>(detail::get<std::uint64_t>(in));
    c.weight = detail::get<double>(in);
  }
  return SparseWeights::from_connections(n_in, n_out, std::move(conns));
}

}  // namespace setnet
