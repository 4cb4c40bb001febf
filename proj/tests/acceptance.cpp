// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// here and never loosened at run time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dsdh/eval.hpp"
#include "dsdh/model_io.hpp"
#include "dsdh/retrieval.hpp"
#include "dsdh/solver.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace dsdh;

namespace {

constexpr double kGradRelTol = 1e-5;
constexpr double kGradAbsFloor = 1e-9;
constexpr double kFdStep = 1e-5;
constexpr double kResidualTol = 1e-8;
constexpr double kPerturbSlack = 1e-10;
constexpr double kBruteSlack = 1e-9;
constexpr double kApTol = 1e-12;
constexpr double kReportTol = 1e-15;
constexpr double kMapThreshold = 0.95;
constexpr double kAblationMargin = 0.02;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Hyperparams make_hp(double mu, double nu, double eta, std::size_t bits) {
  Hyperparams hp;
  hp.mu = mu;
  hp.nu = nu;
  hp.eta = eta;
  hp.bits = bits;
  return hp;
}

bool grad_close(double analytic, double numeric) {
  const double err = std::abs(analytic - numeric);
  return err <= kGradAbsFloor ||
         err / std::max(std::abs(analytic), std::abs(numeric)) <= kGradRelTol;
}

// ---------------------------------------------------------------------------

Outcome gradients() {
  SplitMix64 rng(101);
  Outcome out;
  int instances = 0, regenerated = 0;
  std::size_t entries = 0, bad = 0;
  int per_activation[2] = {0, 0};
  while (instances < 60) {
    const Activation act = instances % 2 == 0 ? Activation::kRelu : Activation::kTanh;
    const std::size_t d = 1 + rng.below(8), k = 1 + rng.below(6), n = 2 + rng.below(9),
                      c = 1 + rng.below(3);
    std::vector<std::size_t> shape{d};
    for (std::size_t l = 0, depth = 1 + rng.below(2); l < depth; ++l)
      shape.push_back(1 + rng.below(6));
    InitResult net = init_encoder(shape, k, act, rng.next());
    for (double& v : net.hash.n) v = rng.uniform(-0.5, 0.5);
    const Matrix x = testing::random_matrix(d, n, rng, -2, 2);
    const ForwardResult fr = forward(net.params, net.hash, x);
    bool kink = false;
    for (const Matrix& z : fr.cache.preactivations)
      for (double v : z.values()) kink |= act == Activation::kRelu && std::abs(v) < 1e-3;
    if (kink) {
      ++regenerated;
      continue;
    }
    const LabelMatrix labels = testing::random_labels(c, n, rng);
    const SimilarityOracle oracle(labels);
    const PairSet pairs = PairSet::all_pairs(oracle);
    const Matrix y = labels.to_matrix();
    const Matrix b = testing::random_codes(k, n, rng);
    const Matrix w = testing::random_matrix(k, c, rng);
    const Hyperparams hp = make_hp(rng.uniform(0, 2), rng.uniform(0, 1), rng.uniform(0.1, 55), k);
    auto objective = [&](const Matrix& h) { return total_objective(h, b, w, y, pairs, hp).total; };

    // dF/dH against differences in H directly.
    const Matrix gh = grad_h_all(fr.h, b, pairs, hp);
    for (std::size_t e = 0; e < gh.size(); ++e) {
      Matrix hp_ = fr.h, hm = fr.h;
      hp_.values()[e] += kFdStep;
      hm.values()[e] -= kFdStep;
      const double fd = (objective(hp_) - objective(hm)) / (2 * kFdStep);
      ++entries;
      bad += !grad_close(gh.values()[e], fd);
    }
    // Every network parameter through backward.
    EncoderGradients g = backward(net.params, net.hash, fr.cache, gh);
    auto params = parameter_views(net.params, net.hash);
    auto grads = parameter_views(g);
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t e = 0; e < params[t].size(); ++e) {
        const double saved = params[t][e];
        params[t][e] = saved + kFdStep;
        const double fp = objective(hash_outputs(net.params, net.hash, x));
        params[t][e] = saved - kFdStep;
        const double fm = objective(hash_outputs(net.params, net.hash, x));
        params[t][e] = saved;
        ++entries;
        bad += !grad_close(grads[t][e], (fp - fm) / (2 * kFdStep));
      }
    }
    ++per_activation[act == Activation::kTanh];
    ++instances;
  }
  out.pass = bad == 0 && per_activation[0] > 0 && per_activation[1] > 0;
  out.detail = fmt("%d instances (relu %d, tanh %d, %d regenerated near a relu kink), "
                   "%zu gradient entries, %zu outside tolerance",
                   instances, per_activation[0], per_activation[1], regenerated, entries, bad);
  return out;
}

Outcome w_step_optimality() {
  SplitMix64 rng(202);
  double worst_residual = 0.0, worst_gap = std::numeric_limits<double>::infinity();
  bool ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 1 + rng.below(12), n = 5 + rng.below(40), c = 1 + rng.below(5);
    const Hyperparams hp = make_hp(rng.uniform(0.1, 2), rng.uniform(0.01, 1), 55, k);
    const Matrix b = testing::random_codes(k, n, rng);
    const Matrix h = testing::random_matrix(k, n, rng);
    const Matrix y = testing::random_labels(c, n, rng).to_matrix();
    TrainState state;
    state.b = b;
    state.h = h;
    state.w = Matrix(k, c);
    w_step(state, y, hp);

    Matrix a = matmul_nt(b, b);
    for (std::size_t i = 0; i < k; ++i) a(i, i) += hp.nu / hp.mu;
    const double residual = frobenius(matmul(a, state.w) - matmul_nt(b, y));
    worst_residual = std::max(worst_residual, residual);
    ok &= residual <= kResidualTol;

    const PairSet none;
    const double best = total_objective(h, b, state.w, y, none, hp).total;
    for (int p = 0; p < 100; ++p) {
      const double scale = std::pow(10.0, -static_cast<double>(rng.below(7)));
      const Matrix moved = state.w + testing::random_matrix(k, c, rng, -scale, scale);
      const double gap = total_objective(h, b, moved, y, none, hp).total - best;
      worst_gap = std::min(worst_gap, gap);
      ok &= gap >= -kPerturbSlack;
    }
  }
  return {ok, fmt("20 instances, max residual %.2e, min perturbation gap %.2e", worst_residual,
                  worst_gap)};
}

bool flip_local_optimal(const Matrix& b, const Matrix& h, const Matrix& w, const Matrix& y,
                        const Hyperparams& hp) {
  const double base = code_objective(b, h, w, y, hp);
  Matrix t = b;
  for (std::size_t e = 0; e < t.size(); ++e) {
    t.values()[e] = -t.values()[e];
    const double v = code_objective(t, h, w, y, hp);
    t.values()[e] = -t.values()[e];
    if (v < base - 1e-12 * std::max(1.0, std::abs(base))) return false;
  }
  return true;
}

Outcome b_step_correctness() {
  SplitMix64 rng(303);
  std::size_t updates = 0, increases = 0, unconverged = 0, not_local = 0;
  // (a) and (b) on instances with K*N <= 64.
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.below(8), n = 1 + rng.below(8), c = 1 + rng.below(4);
    const Hyperparams hp = make_hp(rng.uniform(0.1, 3), rng.uniform(0, 1), rng.uniform(0, 10), k);
    const Matrix h = testing::random_matrix(k, n, rng, -1.5, 1.5);
    const Matrix w = testing::random_matrix(k, c, rng, -2, 2);
    const Matrix y = testing::random_labels(c, n, rng).to_matrix();
    Matrix b = testing::random_codes(k, n, rng);
    double prev = code_objective(b, h, w, y, hp);
    const BStepStats st = dcc_codes(b, h, w, y, hp, 1000, [&](std::size_t, std::size_t) {
      const double now = code_objective(b, h, w, y, hp);
      ++updates;
      increases += now > prev + 1e-12 * std::max(1.0, std::abs(prev));
      prev = now;
    });
    unconverged += !st.converged;
    not_local += !flip_local_optimal(b, h, w, y, hp);
  }
  // (c) against exhaustive enumeration.
  int global = 0, certified_local = 0, neither = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Hyperparams hp = make_hp(1, 0.1, rng.uniform(0.1, 2), 3);
    const Matrix h = testing::random_matrix(3, 4, rng);
    const Matrix w = testing::random_matrix(3, 2, rng, -2, 2);
    const Matrix y = testing::random_labels(2, 4, rng).to_matrix();
    Matrix b = testing::random_codes(3, 4, rng);
    dcc_codes(b, h, w, y, hp, 1000);
    double best = std::numeric_limits<double>::infinity();
    Matrix t(3, 4);
    for (std::uint32_t mask = 0; mask < (1u << 12); ++mask) {
      for (std::size_t e = 0; e < 12; ++e) t.values()[e] = (mask >> e) & 1u ? 1.0 : -1.0;
      best = std::min(best, code_objective(t, h, w, y, hp));
    }
    if (code_objective(b, h, w, y, hp) <= best + kBruteSlack) {
      ++global;
    } else if (flip_local_optimal(b, h, w, y, hp)) {
      ++certified_local;
    } else {
      ++neither;
    }
  }
  const bool ok = increases == 0 && unconverged == 0 && not_local == 0;
  return {ok, fmt("(a) %zu row updates, %zu increases; (b) 200 runs, %zu unconverged, %zu not "
                  "flip-optimal; (c) K=3 N=4: %d global minimum, %d flip-local only, %d neither",
                  updates, increases, unconverged, not_local, global, certified_local, neither)};
}

Outcome alternation() {
  SplitMix64 rng(404);
  bool ok = true;
  double worst = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 1 + rng.below(12), n = 4 + rng.below(30), c = 1 + rng.below(4);
    const Hyperparams hp = make_hp(rng.uniform(0.1, 2), rng.uniform(0.01, 1), rng.uniform(0.1, 55), k);
    TrainState state;
    state.h = testing::random_matrix(k, n, rng, -2, 2);
    state.b = testing::random_codes(k, n, rng);
    state.w = testing::random_matrix(k, c, rng);
    const LabelMatrix labels = testing::random_labels(c, n, rng);
    const Matrix y = labels.to_matrix();
    const SimilarityOracle oracle(labels);
    const double before = total_objective(state.h, state.b, state.w, y, oracle, hp).total;
    w_step(state, y, hp);
    b_step(state, y, hp, 10);
    const double after = total_objective(state.h, state.b, state.w, y, oracle, hp).total;
    const double rise = (after - before) / std::max(1.0, std::abs(before));
    worst = std::max(worst, rise);
    ok &= after <= before + 1e-12 * std::max(1.0, std::abs(before));
  }
  return {ok, fmt("20 instances, largest relative change %.3e", worst)};
}

Outcome retrieval_exactness() {
  SplitMix64 rng(505);
  std::size_t mismatches = 0, rank_mismatches = 0;
  for (std::size_t k : {12, 48, 64, 65, 128}) {
    for (int t = 0; t < 10000; ++t) {
      const Matrix ab = testing::random_codes(k, 2, rng);
      const auto a = ab.col(0), b = ab.col(1);
      double dot = 0;
      for (std::size_t i = 0; i < k; ++i) dot += a[i] * b[i];
      mismatches += 2 * hamming(pack(a), pack(b)) != static_cast<std::size_t>(
                                                          static_cast<double>(k) - dot);
    }
    for (int t = 0; t < 20; ++t) {
      const Matrix codes = testing::random_codes(k, 200, rng);
      std::vector<std::uint64_t> ids(200);
      for (auto& id : ids) id = rng.next();
      const CodeDatabase db = CodeDatabase::from_codes(codes, ids);
      const Matrix q = testing::random_codes(k, 1, rng);
      std::vector<std::pair<double, std::size_t>> naive;
      for (std::size_t i = 0; i < 200; ++i) {
        double dot = 0;
        for (std::size_t r = 0; r < k; ++r) dot += q(r, 0) * codes(r, i);
        naive.push_back({-dot, i});
      }
      std::sort(naive.begin(), naive.end());
      const auto ranked = rank(db, pack(q.col(0)));
      for (std::size_t i = 0; i < 200; ++i) rank_mismatches += ranked[i].index != naive[i].second;
    }
  }
  return {mismatches == 0 && rank_mismatches == 0,
          fmt("5 x 10^4 pairs, %zu distance mismatches; 100 rankings of 200, %zu position "
              "mismatches",
              mismatches, rank_mismatches)};
}

Outcome metric_correctness() {
  SplitMix64 rng(606);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::uint8_t> rel(1 + rng.below(100));
    for (auto& r : rel) r = rng.uniform() < 0.3;
    const std::size_t cut = 1 + rng.below(rel.size());
    // Direct formula: sum of precision@k at relevant k <= T over relevant count in top T.
    double sum = 0;
    std::size_t hits = 0;
    for (std::size_t kk = 0; kk < cut; ++kk) {
      if (!rel[kk]) continue;
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(kk + 1);
    }
    const double expect = hits ? sum / static_cast<double>(hits) : 0.0;
    worst = std::max(worst, std::abs(average_precision(rel, cut) - expect));
  }

  // Five database items, three queries, worked by hand.
  const Matrix codes = Matrix::from_rows(
      {{1, 1, 1, -1, 1}, {1, 1, 1, -1, -1}, {1, 1, -1, -1, 1}, {1, -1, -1, -1, 1}});
  const std::vector<std::uint64_t> ids{0, 1, 2, 3, 4};
  const std::vector<std::size_t> db_cls{0, 1, 0, 1, 0}, q_cls{0, 1, 1};
  const Matrix queries =
      Matrix::from_rows({{1, -1, 1}, {1, -1, -1}, {1, -1, -1}, {1, -1, 1}});
  const EvalReport r = evaluate(CodeDatabase::from_codes(codes, ids),
                                LabelMatrix::from_class_indices(2, db_cls), queries,
                                LabelMatrix::from_class_indices(2, q_cls));
  const std::vector<double> got = {r.ap[0], r.ap[1], r.ap[2], r.map, r.precision_at_radius,
                                   r.topn[0].second, r.topn[1].second, r.pr[2].precision,
                                   r.pr[2].recall};
  const std::vector<double> want = {29.0 / 36, 5.0 / 6, 13.0 / 40, 707.0 / 1080, 0.5,
                                    2.0 / 3,   7.0 / 15, 4.0 / 9,  5.0 / 9};
  double report_err = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) report_err = std::max(report_err, std::abs(got[i] - want[i]));
  const bool ok = worst <= kApTol && report_err <= kReportTol && r.topn.size() == 2 &&
                  r.pr.size() == 5;
  return {ok, fmt("1000 lists, max AP error %.1e; hand report max error %.1e (MAP %.6f)", worst,
                  report_err, r.map)};
}

struct TaskResult {
  double map;
  double precision_at_radius;
};

TaskResult synthetic_task(std::uint64_t seed, Variant variant) {
  const Dataset all = testing::gaussian_classes(10, 16, 240, 6.0, 1000 + seed);
  const SplitResult parts = split(all, 40, 200, seed);
  TrainOptions opt;
  opt.variant = variant;
  opt.seed = seed;
  const HashModel model = train(parts.train, Hyperparams(), Schedule(), opt);
  const CodeDatabase db =
      CodeDatabase::from_codes(model.encode(parts.train.features), parts.train.ids);
  const EvalReport r = evaluate(db, parts.train.labels, model.encode(parts.query.features),
                                parts.query.labels);
  return {r.map, r.precision_at_radius};
}

Outcome end_to_end() {
  double sum = 0;
  std::string maps;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const TaskResult t = synthetic_task(seed, Variant::kFull);
    sum += t.map;
    maps += fmt("%s%.4f", seed > 1 ? ", " : "", t.map);
  }
  const double mean = sum / 3;
  return {mean >= kMapThreshold,
          fmt("K=12, mu=1 nu=0.1 eta=55, 50 epochs; MAP per seed [%s], mean %.4f (need >= %.2f)",
              maps.c_str(), mean, kMapThreshold)};
}

Outcome ablation() {
  const Variant variants[] = {Variant::kFull, Variant::kA, Variant::kB, Variant::kC};
  double mean[4] = {0, 0, 0, 0};
  for (int v = 0; v < 4; ++v)
    for (std::uint64_t seed = 1; seed <= 5; ++seed) mean[v] += synthetic_task(seed, variants[v]).map / 5;
  return {mean[0] >= mean[1] - kAblationMargin,
          fmt("mean MAP over 5 seeds: full %.4f, A %.4f (need full >= A - %.2f); "
              "reported only: B %.4f, C %.4f",
              mean[0], mean[1], kAblationMargin, mean[2], mean[3])};
}

Outcome determinism() {
  const auto dir = testing::scratch_dir("acceptance_determinism");
  const Dataset all = testing::gaussian_classes(5, 8, 40, 6.0, 9);
  const SplitResult parts = split(all, 10, 30, 9);
  Schedule sched;
  sched.epochs = 10;
  TrainOptions opt;
  opt.seed = 17;
  const HashModel a = train(parts.train, Hyperparams(), sched, opt);
  const HashModel b = train(parts.train, Hyperparams(), sched, opt);
  save_model(a, dir / "a.dsdh");
  save_model(b, dir / "b.dsdh");
  const bool same_bytes =
      testing::read_file(dir / "a.dsdh") == testing::read_file(dir / "b.dsdh");

  opt.seed = 18;
  save_model(train(parts.train, Hyperparams(), sched, opt), dir / "c.dsdh");
  const bool seed_matters = testing::read_file(dir / "a.dsdh") != testing::read_file(dir / "c.dsdh");

  const HashModel back = load_model(dir / "a.dsdh");
  save_model(back, dir / "a2.dsdh");
  const bool model_rt =
      back == a && testing::read_file(dir / "a.dsdh") == testing::read_file(dir / "a2.dsdh");

  const CodeDatabase db =
      CodeDatabase::from_codes(a.encode(parts.train.features), parts.train.ids);
  save_database(db, dir / "db.dsdc");
  const CodeDatabase db_back = load_database(dir / "db.dsdc");
  save_database(db_back, dir / "db2.dsdc");
  const bool db_rt =
      db_back == db && testing::read_file(dir / "db.dsdc") == testing::read_file(dir / "db2.dsdc");

  return {same_bytes && seed_matters && model_rt && db_rt,
          fmt("identical model bytes %s, other seed differs %s, model round trip %s, "
              "database round trip %s",
              same_bytes ? "yes" : "no", seed_matters ? "yes" : "no", model_rt ? "yes" : "no",
              db_rt ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds; 0 for none
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", 10, gradients},
      {2, "w-step optimality", 5, w_step_optimality},
      {3, "b-step correctness", 30, b_step_correctness},
      {4, "alternation monotonicity", 0, alternation},
      {5, "retrieval exactness", 0, retrieval_exactness},
      {6, "metric correctness", 0, metric_correctness},
      {7, "end-to-end synthetic retrieval", 120, end_to_end},
      {8, "ablation direction", 0, ablation},
      {9, "determinism and persistence", 0, determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt("%.2fs", secs);
    if (c.time_limit > 0) {
      timing += fmt(" of %.0fs", c.time_limit);
      if (secs >= c.time_limit) {
        o.pass = false;
        timing += " EXCEEDED";
      }
    }
    failed += !o.pass;
    std::printf("criterion %d %-32s %s  %s [%s]\n", c.id, c.name, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
