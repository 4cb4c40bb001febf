#include "dsdh/solver.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <string>

#include "dsdh/error.hpp"

namespace dsdh {

namespace {

struct BatchResult {
  double loss = 0.0;
  Matrix dh;         // K x m
  Matrix dfeatures;  // feature_dim x m, variant B only
  Matrix dhead;      // feature_dim x c, variant B only
  ForwardCache cache;
};

// Loss (and gradients when `with_grad`) of the h-subproblem on one minibatch,
// averaged over the batch size.
BatchResult evaluate_batch(const TrainState& state, const Dataset& train, const Matrix& y,
                           const Hyperparams& hp, Variant variant,
                           std::span<const std::size_t> batch, bool with_grad) {
  const SimilarityOracle oracle(train.labels);
  const Matrix xb = train.features.gather_cols(batch);
  ForwardResult fwd = forward(state.encoder, state.hash, xb);
  const PairSet pairs = PairSet::all_pairs(oracle, batch);
  const double inv_m = 1.0 / static_cast<double>(batch.size());

  // Within-batch pairs are a sample of all N(N-1) ordered pairs; scaling by
  // (N-1)/(m-1) keeps the pairwise term an unbiased estimate, per item, of
  // its full-data value.
  const double pair_scale =
      batch.size() > 1 ? static_cast<double>(train.size() - 1) / static_cast<double>(batch.size() - 1)
                       : 0.0;
  BatchResult r;
  r.loss = pair_scale * pairwise_nll(fwd.h, pairs);
  if (with_grad) r.dh = pairwise_grad(fwd.h, pairs) * pair_scale;

  if (variant == Variant::kC) {
    // The sign penalty has zero gradient almost everywhere; only the
    // classifier on h reaches the network.
    const Matrix yb = y.gather_cols(batch);
    r.loss += hp.mu * classification_loss(state.w, fwd.h, yb);
    if (with_grad) r.dh += classification_grad_h(state.w, fwd.h, yb, hp.mu);
  } else {
    const Matrix bb = state.b.gather_cols(batch);
    auto hv = fwd.h.values();
    auto bv = bb.values();
    double q = 0.0;
    for (std::size_t i = 0; i < hv.size(); ++i) q += (bv[i] - hv[i]) * (bv[i] - hv[i]);
    r.loss += hp.eta * q;
    if (with_grad) {
      auto gv = r.dh.values();
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] -= 2.0 * hp.eta * (bv[i] - hv[i]);
    }
  }

  if (variant == Variant::kB) {
    const Matrix yb = y.gather_cols(batch);
    const Matrix residual = yb - matmul_tn(state.head, fwd.features);  // c x m
    const double n_total = static_cast<double>(train.size());
    r.loss += hp.mu * frobenius_sq(residual) +
              hp.nu * frobenius_sq(state.head) * static_cast<double>(batch.size()) / n_total;
    if (with_grad) {
      r.dfeatures = matmul(state.head, residual) * (-2.0 * hp.mu * inv_m);
      r.dhead = matmul_nt(fwd.features, residual) * (-2.0 * hp.mu * inv_m) +
                state.head * (2.0 * hp.nu / n_total);
    }
  }

  r.loss *= inv_m;
  if (with_grad) r.dh *= inv_m;
  r.cache = std::move(fwd.cache);
  return r;
}

std::vector<std::size_t> next_batch(TrainState& state, std::size_t n, std::size_t batch_size) {
  if (state.order.size() != n || state.cursor >= n) {
    state.order.resize(n);
    std::iota(state.order.begin(), state.order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(state.order), state.rng);
    state.cursor = 0;
  }
  const std::size_t end = std::min(n, state.cursor + batch_size);
  std::vector<std::size_t> batch(state.order.begin() + static_cast<std::ptrdiff_t>(state.cursor),
                                 state.order.begin() + static_cast<std::ptrdiff_t>(end));
  state.cursor = end;
  return batch;
}

void check_state_shapes(const TrainState& state, const Matrix& y) {
  if (state.b.rows() != state.w.rows() || state.b.cols() != y.cols() ||
      state.w.cols() != y.rows() || state.h.rows() != state.b.rows() ||
      state.h.cols() != state.b.cols()) {
    throw DimensionError("train state shapes disagree: B " + state.b.shape_string() + ", H " +
                         state.h.shape_string() + ", W " + state.w.shape_string() + ", Y " +
                         y.shape_string());
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::kFull;
  if (name == "A" || name == "a") return Variant::kA;
  if (name == "B" || name == "b") return Variant::kB;
  if (name == "C" || name == "c") return Variant::kC;
  throw ConfigError("unknown variant \"" + std::string(name) + "\" (expected full, A, B or C)");
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kFull:
      return "full";
    case Variant::kA:
      return "A";
    case Variant::kB:
      return "B";
    case Variant::kC:
      return "C";
  }
  return "full";
}

void Schedule::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (dcc_max_sweeps == 0) throw ConfigError("dcc_max_sweeps must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be a finite value >= 0");
  }
  if (!(lr_decay > 0.0) || !std::isfinite(lr_decay)) throw ConfigError("lr_decay must be > 0");
}

double Schedule::learning_rate_at(std::size_t epoch) const {
  const std::size_t quarter = std::max<std::size_t>(1, epochs / 4);
  return learning_rate * std::pow(lr_decay, static_cast<double>(epoch / quarter));
}

std::size_t Schedule::steps_for(std::size_t items) const {
  if (steps_per_epoch > 0) return steps_per_epoch;
  return (items + batch_size - 1) / batch_size;
}

TrainState init_state(const Matrix& features, std::size_t classes, const Hyperparams& hp,
                      const EncoderConfig& encoder, std::uint64_t seed) {
  SplitMix64 master(seed);
  std::vector<std::size_t> shape;
  shape.push_back(features.rows());
  shape.insert(shape.end(), encoder.hidden.begin(), encoder.hidden.end());
  auto init = init_encoder(shape, hp.bits, encoder.activation, master.next());

  TrainState s;
  s.encoder = std::move(init.params);
  s.hash = std::move(init.hash);
  s.rng = master.fork();
  s.h = hash_outputs(s.encoder, s.hash, features);
  s.b = sign_of(s.h);
  s.w = Matrix(hp.bits, classes);
  s.head = Matrix(s.encoder.feature_dim(), classes);
  return s;
}

double minibatch_loss(const TrainState& state, const Dataset& train, const Hyperparams& hp,
                      Variant variant, std::span<const std::size_t> batch) {
  return evaluate_batch(state, train, train.labels.to_matrix(), hp, variant, batch, false).loss;
}

void h_step(TrainState& state, const Dataset& train, const Hyperparams& hp,
            const Schedule& schedule, const HStepOptions& options) {
  const std::size_t n = train.size();
  if (n == 0) throw DataError("h_step: empty training set");
  const Matrix y = train.labels.to_matrix();
  check_state_shapes(state, y);

  const std::size_t steps = options.steps > 0 ? options.steps : schedule.steps_for(n);
  const double lr = options.learning_rate;
  for (std::size_t step = 0; step < steps; ++step) {
    const auto batch = next_batch(state, n, schedule.batch_size);
    BatchResult r = evaluate_batch(state, train, y, hp, options.variant, batch, true);
    if (!std::isfinite(r.loss)) {
      throw DivergenceError("non-finite loss at epoch " + std::to_string(state.epoch + 1) +
                            ", step " + std::to_string(step + 1));
    }
    EncoderGradients g = backward(state.encoder, state.hash, r.cache, r.dh, r.dfeatures);
    auto params = parameter_views(state.encoder, state.hash);
    auto grads = parameter_views(g);
    for (std::size_t t = 0; t < params.size(); ++t)
      for (std::size_t i = 0; i < params[t].size(); ++i) params[t][i] -= lr * grads[t][i];
    if (options.variant == Variant::kB) {
      r.dhead *= lr;
      state.head -= r.dhead;
    }
  }

  state.h = hash_outputs(state.encoder, state.hash, train.features);
  if (!all_finite(state.h)) {
    throw DivergenceError("non-finite hash outputs after epoch " +
                          std::to_string(state.epoch + 1));
  }
}

Matrix solve_classifier(const Matrix& codes, const Matrix& y, const Hyperparams& hp) {
  if (codes.cols() != y.cols()) {
    throw DimensionError("solve_classifier: codes " + codes.shape_string() + " vs Y " +
                         y.shape_string());
  }
  if (hp.mu == 0.0) return Matrix(codes.rows(), y.rows());
  Matrix gram = matmul_nt(codes, codes);  // K x K
  const double ridge = hp.nu / hp.mu;
  for (std::size_t k = 0; k < gram.rows(); ++k) gram(k, k) += ridge;
  return solve_spd(gram, matmul_nt(codes, y));  // K x c
}

void w_step(TrainState& state, const Matrix& y, const Hyperparams& hp) {
  check_state_shapes(state, y);
  state.w = solve_classifier(state.b, y, hp);
}

BStepStats dcc_codes(Matrix& b, const Matrix& h, const Matrix& w, const Matrix& y,
                     const Hyperparams& hp, std::size_t max_sweeps,
                     const std::function<void(std::size_t, std::size_t)>& on_row_update) {
  if (b.rows() != h.rows() || b.cols() != h.cols() || w.rows() != b.rows() ||
      w.cols() != y.rows() || y.cols() != b.cols()) {
    throw DimensionError("b_step: B " + b.shape_string() + ", H " + h.shape_string() + ", W " +
                         w.shape_string() + ", Y " + y.shape_string());
  }
  BStepStats stats;
  const std::size_t k_bits = b.rows();
  const std::size_t n = b.cols();

  if (hp.mu == 0.0) {
    // Only the eta term remains; its minimizer is the sign of H.
    for (std::size_t k = 0; k < k_bits; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const double v = sgn(h(k, i));
        stats.flips += b(k, i) != v;
        b(k, i) = v;
      }
      if (on_row_update) on_row_update(0, k);
    }
    stats.sweeps = 1;
    stats.converged = true;
    return stats;
  }

  // P = W Y + (eta/mu) H
  Matrix p = matmul(w, y);
  const double ratio = hp.eta / hp.mu;
  {
    auto pv = p.values();
    auto hv = h.values();
    for (std::size_t i = 0; i < pv.size(); ++i) pv[i] += ratio * hv[i];
  }
  // (W W^T)_{kl} = w_k . w_l over rows of W.
  const Matrix gram = matmul_nt(w, w);

  std::vector<double> x(n);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
#ifndef NDEBUG
    const double before = code_objective(b, h, w, y, hp);
#endif
    std::size_t flips = 0;
    for (std::size_t k = 0; k < k_bits; ++k) {
      // x = sgn(p - B1^T W1 w): the exact minimizer over row k with the
      // other rows fixed.
      const auto pk = p.row(k);
      for (std::size_t i = 0; i < n; ++i) x[i] = pk[i];
      for (std::size_t l = 0; l < k_bits; ++l) {
        if (l == k) continue;
        const double g = gram(k, l);
        if (g == 0.0) continue;
        const auto bl = b.row(l);
        for (std::size_t i = 0; i < n; ++i) x[i] -= g * bl[i];
      }
      auto bk = b.row(k);
      for (std::size_t i = 0; i < n; ++i) {
        const double v = sgn(x[i]);
        flips += bk[i] != v;
        bk[i] = v;
      }
      if (on_row_update) on_row_update(sweep, k);
    }
#ifndef NDEBUG
    const double after = code_objective(b, h, w, y, hp);
    assert(after <= before + 1e-9 * std::max(1.0, std::abs(before)));
#endif
    stats.flips += flips;
    stats.sweeps = sweep + 1;
    if (flips == 0) {
      stats.converged = true;
      break;
    }
  }
  return stats;
}

BStepStats b_step(TrainState& state, const Matrix& y, const Hyperparams& hp,
                  std::size_t max_sweeps,
                  const std::function<void(std::size_t, std::size_t)>& on_row_update) {
  check_state_shapes(state, y);
  return dcc_codes(state.b, state.h, state.w, y, hp, max_sweeps, on_row_update);
}

// ---------------------------------------------------------------------------

Matrix HashModel::outputs(const Matrix& raw_features) const {
  return hash_outputs(encoder, hash, standardizer.apply(raw_features));
}

Matrix HashModel::encode(const Matrix& raw_features) const {
  return sign_of(outputs(raw_features));
}

HashModel train(const Dataset& dataset, const Hyperparams& hp, const Schedule& schedule,
                const TrainOptions& options) {
  hp.validate();
  schedule.validate();
  dataset.validate();
  if (dataset.size() == 0) throw DataError("train: empty dataset");

  HashModel model;
  model.standardizer = options.encoder.standardize ? Standardizer::fit(dataset.features)
                                                   : Standardizer::identity(dataset.dim());
  Dataset train_set = dataset;
  train_set.features = model.standardizer.apply(dataset.features);
  const Matrix y = train_set.labels.to_matrix();

  TrainState state =
      init_state(train_set.features, train_set.classes(), hp, options.encoder, options.seed);

  for (std::size_t e = 0; e < schedule.epochs; ++e) {
    state.epoch = e;
    const double lr = schedule.learning_rate_at(e);
    h_step(state, train_set, hp, schedule, {options.variant, lr, 0});
    switch (options.variant) {
      case Variant::kFull:
        w_step(state, y, hp);
        b_step(state, y, hp, schedule.dcc_max_sweeps);
        break;
      case Variant::kC:
        state.w = solve_classifier(state.h, y, hp);
        state.b = sign_of(state.h);
        break;
      case Variant::kA:
      case Variant::kB:
        state.b = sign_of(state.h);
        break;
    }
    if (!all_finite(state.w)) {
      throw DivergenceError("non-finite classifier after epoch " + std::to_string(e + 1));
    }
    if (options.on_epoch) options.on_epoch({e + 1, lr, state, train_set});
  }

  model.encoder = std::move(state.encoder);
  model.hash = std::move(state.hash);
  model.w = std::move(state.w);
  model.codes = std::move(state.b);
  model.code_ids = dataset.ids;
  return model;
}

}  // namespace dsdh
