#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "dsdh/data.hpp"
#include "dsdh/encoder.hpp"
#include "dsdh/matrix.hpp"
#include "dsdh/objective.hpp"
#include "dsdh/rng.hpp"

namespace dsdh {

// Which objective to train.
//   kFull: pairwise likelihood + classifier on binary codes, codes by DCC.
//   kA:    pairwise likelihood only, codes = sgn(H).
//   kB:    pairwise stream plus a separate classification head on the
//          encoder features; codes = sgn(H).
//   kC:    classifier on the continuous outputs H with a sign penalty;
//          codes = sgn(H).
enum class Variant { kFull, kA, kB, kC };

Variant parse_variant(std::string_view name);
std::string_view variant_name(Variant v);

struct Schedule {
  std::size_t epochs = 50;
  // Minibatch steps per epoch; 0 means one pass over the training set.
  std::size_t steps_per_epoch = 0;
  std::size_t batch_size = 32;
  double learning_rate = 3e-4;
  // Multiplier applied every quarter of the epochs.
  double lr_decay = 0.5;
  std::size_t dcc_max_sweeps = 10;

  void validate() const;
  double learning_rate_at(std::size_t epoch) const;
  std::size_t steps_for(std::size_t items) const;
};

struct EncoderConfig {
  std::vector<std::size_t> hidden = {64, 64};
  Activation activation = Activation::kRelu;
  bool standardize = true;
};

// Mutable state of the alternating minimization over one training set.
struct TrainState {
  EncoderParams encoder;
  HashLayer hash;
  Matrix w;     // K x c classifier
  Matrix b;     // K x N codes, entries +-1
  Matrix h;     // K x N hash-layer outputs from the last refresh
  Matrix head;  // feature_dim x c, only used by variant B
  std::size_t epoch = 0;
  SplitMix64 rng;
  std::vector<std::size_t> order;  // minibatch permutation
  std::size_t cursor = 0;
};

// `features` must already be standardized. Initializes the encoder from
// `seed`, runs a forward pass, sets B = sgn(H) and W = 0.
TrainState init_state(const Matrix& features, std::size_t classes, const Hyperparams& hp,
                      const EncoderConfig& encoder, std::uint64_t seed);

// Minibatch gradient descent on the encoder and hash layer with W and B
// fixed; refreshes H over the whole training set afterwards. Uses all pairs
// within each minibatch. Throws DivergenceError on a non-finite loss.
struct HStepOptions {
  Variant variant = Variant::kFull;
  double learning_rate = 3e-4;
  std::size_t steps = 0;  // 0: one pass
};
void h_step(TrainState& state, const Dataset& train, const Hyperparams& hp,
            const Schedule& schedule, const HStepOptions& options);

// Minibatch loss used by h_step, averaged over the batch. Exposed for tests.
double minibatch_loss(const TrainState& state, const Dataset& train, const Hyperparams& hp,
                      Variant variant, std::span<const std::size_t> batch);

// Closed-form ridge classifier: argmin_W mu sum ||y_i - W^T c_i||^2 + nu ||W||^2
// = (C C^T + (nu/mu) I)^-1 C Y^T. Zero when mu == 0.
Matrix solve_classifier(const Matrix& codes, const Matrix& y, const Hyperparams& hp);

void w_step(TrainState& state, const Matrix& y, const Hyperparams& hp);

struct BStepStats {
  std::size_t sweeps = 0;
  std::size_t flips = 0;
  bool converged = false;
};

// Discrete cyclic coordinate descent on B, one row (bit position) at a time,
// until a full sweep flips nothing or `max_sweeps` is reached. With mu == 0
// the minimizer is sgn(H) directly. `on_row_update`, when set, runs after
// each row update with (sweep, row).
BStepStats b_step(TrainState& state, const Matrix& y, const Hyperparams& hp,
                  std::size_t max_sweeps,
                  const std::function<void(std::size_t, std::size_t)>& on_row_update = {});

// Same update on bare matrices; `b` is updated in place.
BStepStats dcc_codes(Matrix& b, const Matrix& h, const Matrix& w, const Matrix& y,
                     const Hyperparams& hp, std::size_t max_sweeps,
                     const std::function<void(std::size_t, std::size_t)>& on_row_update = {});

// Trained hash function plus the training codes.
struct HashModel {
  Standardizer standardizer;
  EncoderParams encoder;
  HashLayer hash;
  Matrix w;                         // K x c
  Matrix codes;                     // K x N training codes (may be empty)
  std::vector<std::uint64_t> code_ids;

  std::size_t input_dim() const { return encoder.input_dim(); }
  std::size_t bits() const { return hash.bits(); }
  std::size_t classes() const { return w.cols(); }

  // Continuous outputs for raw (unstandardized) features, K x N.
  Matrix outputs(const Matrix& raw_features) const;
  // sgn(outputs), K x N.
  Matrix encode(const Matrix& raw_features) const;

  bool operator==(const HashModel&) const = default;
};

struct EpochInfo {
  std::size_t epoch;  // 1-based
  double learning_rate;
  const TrainState& state;
  const Dataset& train;  // standardized features
};

struct TrainOptions {
  Variant variant = Variant::kFull;
  EncoderConfig encoder;
  std::uint64_t seed = 0;
  std::function<void(const EpochInfo&)> on_epoch;
};

HashModel train(const Dataset& dataset, const Hyperparams& hp, const Schedule& schedule,
                const TrainOptions& options);

}  // namespace dsdh
