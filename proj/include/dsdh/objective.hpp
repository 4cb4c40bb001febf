#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dsdh/data.hpp"
#include "dsdh/matrix.hpp"

namespace dsdh {

// Labelled pairs (i, j, s_ij) over the columns of H.
//
// With `symmetric` set, each stored pair stands for both (i, j) and (j, i),
// so it counts twice in the likelihood and feeds both sums of the gradient.
// Symmetric sets store pairs canonically (i < j) and reject self-pairs.
class PairSet {
 public:
  struct Pair {
    std::size_t i;
    std::size_t j;
    int s;
  };

  explicit PairSet(bool symmetric = true) : symmetric_(symmetric) {}

  // Throws DataError on a duplicate, a non-{0,1} label, or a self-pair in a
  // symmetric set.
  void add(std::size_t i, std::size_t j, int s);

  // Every unordered pair among `items` (positions 0..items.size()-1 in the
  // resulting set), labelled by the oracle. Symmetric.
  static PairSet all_pairs(const SimilarityOracle& oracle, std::span<const std::size_t> items);
  // All unordered pairs of 0..n-1.
  static PairSet all_pairs(const SimilarityOracle& oracle);

  bool symmetric() const { return symmetric_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const std::vector<Pair>& pairs() const { return pairs_; }
  // Weight of one stored pair in the likelihood.
  double multiplicity() const { return symmetric_ ? 2.0 : 1.0; }

  // Throws DimensionError if any index is >= n.
  void check_indices(std::size_t n) const;

 private:
  bool symmetric_;
  std::vector<Pair> pairs_;
  std::vector<std::uint64_t> keys_;  // sorted, for duplicate detection
};

struct Hyperparams {
  double mu = 1.0;
  double nu = 0.1;
  double eta = 55.0;
  std::size_t bits = 12;

  // Throws ConfigError for negative weights, mu + eta == 0, or bits == 0.
  void validate() const;
};

struct TermBreakdown {
  double pairwise = 0.0;        // negative log-likelihood over the pairs
  double classification = 0.0; // mu * sum ||y_i - W^T b_i||^2
  double regularizer = 0.0;     // nu * ||W||_F^2
  double quantization = 0.0;    // eta * sum ||b_i - h_i||^2
  double total = 0.0;
};

// sum over pairs of log(1 + e^psi) - s * psi with psi = h_i^T h_j / 2.
double pairwise_nll(const Matrix& h, const PairSet& pairs);

// Same, over every ordered pair (i, j), i != j, labelled by the oracle,
// without materializing the pairs.
double pairwise_nll(const Matrix& h, const SimilarityOracle& oracle);

// sum_i ||y_i - W^T b_i||^2. W is K x c, B is K x N, Y is c x N.
double classification_loss(const Matrix& w, const Matrix& b, const Matrix& y);

// Every term of the relaxed objective. B must be a +-1 matrix.
TermBreakdown total_objective(const Matrix& h, const Matrix& b, const Matrix& w,
                              const Matrix& y, const PairSet& pairs, const Hyperparams& hp);

// total_objective over every ordered pair labelled by the oracle.
TermBreakdown total_objective(const Matrix& h, const Matrix& b, const Matrix& w,
                              const Matrix& y, const SimilarityOracle& oracle,
                              const Hyperparams& hp);

// Objective minimized by the code update with W and H held fixed:
// mu sum ||y_i - W^T b_i||^2 + nu ||W||^2 + eta sum ||b_i - h_i||^2.
double code_objective(const Matrix& b, const Matrix& h, const Matrix& w, const Matrix& y,
                      const Hyperparams& hp);

// Sign-penalty ablation: classification on h_i, penalty ||b_i - sgn(h_i)||^2.
double dsdhc_objective(const Matrix& h, const Matrix& b, const Matrix& w, const Matrix& y,
                       const PairSet& pairs, const Hyperparams& hp);

// dF/dh_i of total_objective, for a single item.
std::vector<double> grad_h(const Matrix& h, const Matrix& b, const PairSet& pairs,
                           const Hyperparams& hp, std::size_t i);

// dF/dH for all items at once (K x N); column i equals grad_h(..., i).
Matrix grad_h_all(const Matrix& h, const Matrix& b, const PairSet& pairs, const Hyperparams& hp);

// Gradient of the pairwise likelihood alone (K x N).
Matrix pairwise_grad(const Matrix& h, const PairSet& pairs);

// Gradient of mu * sum ||y_i - W^T h_i||^2 with respect to H (K x N).
Matrix classification_grad_h(const Matrix& w, const Matrix& h, const Matrix& y, double mu);

// Throws DataError naming the first entry of `b` that is not +-1.
void require_binary(const Matrix& b);

}  // namespace dsdh
