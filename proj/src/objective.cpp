#include "dsdh/objective.hpp"

#include <algorithm>
#include <string>

#include "dsdh/error.hpp"

namespace dsdh {

namespace {

std::uint64_t pair_key(std::size_t i, std::size_t j) {
  return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint64_t>(j);
}

void require_same_items(const char* op, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

// psi_ij = h_i^T h_j / 2
double half_inner(const Matrix& h, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t k = 0; k < h.rows(); ++k) s += h(k, i) * h(k, j);
  return 0.5 * s;
}

double sum_sq_column_diff(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  return s;
}

void check_classifier_shapes(const Matrix& w, const Matrix& codes, const Matrix& y) {
  if (w.rows() != codes.rows() || w.cols() != y.rows() || codes.cols() != y.cols()) {
    throw DimensionError("classifier shapes: W " + w.shape_string() + ", codes " +
                         codes.shape_string() + ", Y " + y.shape_string());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// PairSet

void PairSet::add(std::size_t i, std::size_t j, int s) {
  if (s != 0 && s != 1) throw DataError("pair label must be 0 or 1, got " + std::to_string(s));
  if (symmetric_) {
    if (i == j) throw DataError("symmetric pair set rejects self-pair " + std::to_string(i));
    if (i > j) std::swap(i, j);
  }
  const std::uint64_t key = pair_key(i, j);
  const auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it != keys_.end() && *it == key) {
    throw DataError("duplicate pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
  }
  keys_.insert(it, key);
  pairs_.push_back({i, j, s});
}

PairSet PairSet::all_pairs(const SimilarityOracle& oracle, std::span<const std::size_t> items) {
  PairSet set(true);
  const std::size_t n = items.size();
  set.pairs_.reserve(n * (n - (n > 0)) / 2);
  set.keys_.reserve(set.pairs_.capacity());
  // Emitted in (i, j) lexicographic order, so keys stay sorted.
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      set.pairs_.push_back({a, b, oracle.similar(items[a], items[b])});
      set.keys_.push_back(pair_key(a, b));
    }
  }
  return set;
}

PairSet PairSet::all_pairs(const SimilarityOracle& oracle) {
  std::vector<std::size_t> items(oracle.size());
  for (std::size_t i = 0; i < items.size(); ++i) items[i] = i;
  return all_pairs(oracle, items);
}

void PairSet::check_indices(std::size_t n) const {
  for (const auto& p : pairs_) {
    if (p.i >= n || p.j >= n) {
      throw DimensionError("pair (" + std::to_string(p.i) + ", " + std::to_string(p.j) +
                           ") out of range for " + std::to_string(n) + " items");
    }
  }
}

void Hyperparams::validate() const {
  if (mu < 0.0 || nu < 0.0 || eta < 0.0) throw ConfigError("mu, nu and eta must be >= 0");
  if (mu + eta <= 0.0) throw ConfigError("mu + eta must be positive");
  if (bits == 0) throw ConfigError("bits must be >= 1");
}

// ---------------------------------------------------------------------------
// Terms

double pairwise_nll(const Matrix& h, const PairSet& pairs) {
  pairs.check_indices(h.cols());
  double total = 0.0;
  for (const auto& p : pairs.pairs()) {
    const double psi = half_inner(h, p.i, p.j);
    total += log1p_exp(p.s ? -psi : psi);
  }
  return pairs.multiplicity() * total;
}

double pairwise_nll(const Matrix& h, const SimilarityOracle& oracle) {
  if (oracle.size() != h.cols()) {
    throw DimensionError("pairwise_nll: " + std::to_string(h.cols()) + " items, oracle has " +
                         std::to_string(oracle.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < h.cols(); ++i) {
    for (std::size_t j = i + 1; j < h.cols(); ++j) {
      const double psi = half_inner(h, i, j);
      total += log1p_exp(oracle.similar(i, j) ? -psi : psi);
    }
  }
  return 2.0 * total;
}

double classification_loss(const Matrix& w, const Matrix& b, const Matrix& y) {
  check_classifier_shapes(w, b, y);
  const Matrix pred = matmul_tn(w, b);  // c x N
  return sum_sq_column_diff(y, pred);
}

void require_binary(const Matrix& b) {
  for (std::size_t r = 0; r < b.rows(); ++r) {
    for (std::size_t c = 0; c < b.cols(); ++c) {
      const double v = b(r, c);
      if (v != 1.0 && v != -1.0) {
        throw DataError("code matrix entry (" + std::to_string(r) + ", " + std::to_string(c) +
                        ") is " + std::to_string(v) + ", not +-1");
      }
    }
  }
}

namespace {

template <typename Pairs>
TermBreakdown breakdown(const Matrix& h, const Matrix& b, const Matrix& w, const Matrix& y,
                        const Pairs& pairs, const Hyperparams& hp) {
  if (h.rows() != b.rows()) {
    throw DimensionError("total_objective: H " + h.shape_string() + " vs B " + b.shape_string());
  }
  require_same_items("total_objective", h, b);
  require_binary(b);
  TermBreakdown t;
  t.pairwise = pairwise_nll(h, pairs);
  t.classification = hp.mu * classification_loss(w, b, y);
  t.regularizer = hp.nu * frobenius_sq(w);
  t.quantization = hp.eta * sum_sq_column_diff(b, h);
  t.total = t.pairwise + t.classification + t.regularizer + t.quantization;
  return t;
}

}  // namespace

TermBreakdown total_objective(const Matrix& h, const Matrix& b, const Matrix& w,
                              const Matrix& y, const PairSet& pairs, const Hyperparams& hp) {
  return breakdown(h, b, w, y, pairs, hp);
}

TermBreakdown total_objective(const Matrix& h, const Matrix& b, const Matrix& w,
                              const Matrix& y, const SimilarityOracle& oracle,
                              const Hyperparams& hp) {
  return breakdown(h, b, w, y, oracle, hp);
}

double code_objective(const Matrix& b, const Matrix& h, const Matrix& w, const Matrix& y,
                      const Hyperparams& hp) {
  if (h.rows() != b.rows()) {
    throw DimensionError("code_objective: H " + h.shape_string() + " vs B " + b.shape_string());
  }
  require_same_items("code_objective", h, b);
  return hp.mu * classification_loss(w, b, y) + hp.nu * frobenius_sq(w) +
         hp.eta * sum_sq_column_diff(b, h);
}

double dsdhc_objective(const Matrix& h, const Matrix& b, const Matrix& w, const Matrix& y,
                       const PairSet& pairs, const Hyperparams& hp) {
  if (h.rows() != b.rows()) {
    throw DimensionError("dsdhc_objective: H " + h.shape_string() + " vs B " + b.shape_string());
  }
  require_same_items("dsdhc_objective", h, b);
  return pairwise_nll(h, pairs) + hp.mu * classification_loss(w, h, y) +
         hp.nu * frobenius_sq(w) + hp.eta * sum_sq_column_diff(b, sign_of(h));
}

// ---------------------------------------------------------------------------
// Gradients

Matrix pairwise_grad(const Matrix& h, const PairSet& pairs) {
  pairs.check_indices(h.cols());
  Matrix g(h.rows(), h.cols());
  const double half_weight = 0.5 * pairs.multiplicity();
  for (const auto& p : pairs.pairs()) {
    // d/dh_i [log(1 + e^psi) - s psi] = (sigma(psi) - s) h_j / 2, and
    // symmetrically for h_j.
    const double c = half_weight * (sigmoid(half_inner(h, p.i, p.j)) - p.s);
    for (std::size_t k = 0; k < h.rows(); ++k) {
      g(k, p.i) += c * h(k, p.j);
      g(k, p.j) += c * h(k, p.i);
    }
  }
  return g;
}

Matrix grad_h_all(const Matrix& h, const Matrix& b, const PairSet& pairs, const Hyperparams& hp) {
  if (h.rows() != b.rows()) {
    throw DimensionError("grad_h: H " + h.shape_string() + " vs B " + b.shape_string());
  }
  require_same_items("grad_h", h, b);
  Matrix g = pairwise_grad(h, pairs);
  auto gv = g.values();
  auto hv = h.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < gv.size(); ++i) gv[i] -= 2.0 * hp.eta * (bv[i] - hv[i]);
  return g;
}

std::vector<double> grad_h(const Matrix& h, const Matrix& b, const PairSet& pairs,
                           const Hyperparams& hp, std::size_t i) {
  if (i >= h.cols()) {
    throw DimensionError("grad_h: item " + std::to_string(i) + " out of range for " +
                         std::to_string(h.cols()) + " items");
  }
  if (h.rows() != b.rows()) {
    throw DimensionError("grad_h: H " + h.shape_string() + " vs B " + b.shape_string());
  }
  require_same_items("grad_h", h, b);
  pairs.check_indices(h.cols());
  const std::size_t k_bits = h.rows();
  std::vector<double> g(k_bits, 0.0);
  const double half_weight = 0.5 * pairs.multiplicity();
  for (const auto& p : pairs.pairs()) {
    if (p.i != i && p.j != i) continue;
    const double c = half_weight * (sigmoid(half_inner(h, p.i, p.j)) - p.s);
    // Each endpoint equal to i contributes once (a self-pair contributes twice).
    if (p.i == i)
      for (std::size_t k = 0; k < k_bits; ++k) g[k] += c * h(k, p.j);
    if (p.j == i)
      for (std::size_t k = 0; k < k_bits; ++k) g[k] += c * h(k, p.i);
  }
  for (std::size_t k = 0; k < k_bits; ++k) g[k] -= 2.0 * hp.eta * (b(k, i) - h(k, i));
  return g;
}

Matrix classification_grad_h(const Matrix& w, const Matrix& h, const Matrix& y, double mu) {
  check_classifier_shapes(w, h, y);
  Matrix residual = y - matmul_tn(w, h);  // c x N
  Matrix g = matmul(w, residual);         // K x N
  g *= -2.0 * mu;
  return g;
}

}  // namespace dsdh
