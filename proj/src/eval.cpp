#include "dsdh/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <string>

#include "dsdh/error.hpp"
#include "dsdh/parallel.hpp"

namespace dsdh {

namespace {

constexpr std::size_t kQueriesPerTask = 32;

struct QueryResult {
  double ap = 0.0;
  double radius_precision = 0.0;
  bool no_relevant = false;
  bool empty_radius = false;
};

struct TaskSums {
  std::vector<double> hits;    // sum over queries of relevant count in top n
  std::vector<double> recall;  // sum over queries of recall@n
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

}  // namespace

double average_precision(std::span<const std::uint8_t> relevance,
                         std::optional<std::size_t> truncate) {
  const std::size_t cut = std::min(relevance.size(), truncate.value_or(relevance.size()));
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < cut; ++k) {
    if (relevance[k]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

EvalReport evaluate(const CodeDatabase& db, const LabelMatrix& db_labels,
                    const Matrix& query_codes, const LabelMatrix& query_labels,
                    const EvalOptions& options) {
  if (db_labels.items() != db.size()) {
    throw DimensionError("evaluate: " + std::to_string(db.size()) + " database codes but " +
                         std::to_string(db_labels.items()) + " label columns");
  }
  if (query_codes.cols() != query_labels.items()) {
    throw DimensionError("evaluate: " + std::to_string(query_codes.cols()) + " query codes but " +
                         std::to_string(query_labels.items()) + " query labels");
  }
  if (query_codes.rows() != db.bits()) {
    throw DimensionError("evaluate: query codes have " + std::to_string(query_codes.rows()) +
                         " bits, database " + std::to_string(db.bits()));
  }
  if (db_labels.classes() != query_labels.classes()) {
    throw DimensionError("evaluate: label dimensions " + std::to_string(db_labels.classes()) +
                         " vs " + std::to_string(query_labels.classes()));
  }

  const std::size_t nq = query_codes.cols();
  const std::size_t ndb = db.size();
  std::vector<QueryResult> per_query(nq);
  const std::size_t tasks = (nq + kQueriesPerTask - 1) / kQueriesPerTask;
  std::vector<TaskSums> sums(tasks);

  parallel_for(tasks, [&](std::size_t t) {
    TaskSums& s = sums[t];
    s.hits.assign(ndb, 0.0);
    s.recall.assign(ndb, 0.0);
    std::vector<std::uint8_t> rel(ndb);
    std::vector<std::size_t> cum(ndb);
    const std::size_t end = std::min(nq, (t + 1) * kQueriesPerTask);
    for (std::size_t q = t * kQueriesPerTask; q < end; ++q) {
      const PackedCode code = pack(query_codes.col(q));
      const auto ranking = rank(db, code);
      std::size_t total = 0, in_radius = 0, relevant_in_radius = 0;
      for (std::size_t r = 0; r < ndb; ++r) {
        rel[r] = share_label(query_labels, q, db_labels, ranking[r].index) ? 1 : 0;
        total += rel[r];
        cum[r] = total;
        if (ranking[r].distance <= options.radius) {
          ++in_radius;
          relevant_in_radius += rel[r];
        }
      }
      QueryResult& out = per_query[q];
      out.ap = average_precision(rel, options.truncate);
      out.no_relevant = total == 0;
      out.empty_radius = in_radius == 0;
      out.radius_precision =
          in_radius == 0 ? 0.0
                         : static_cast<double>(relevant_in_radius) / static_cast<double>(in_radius);
      for (std::size_t r = 0; r < ndb; ++r) {
        s.hits[r] += static_cast<double>(cum[r]);
        if (total > 0) s.recall[r] += static_cast<double>(cum[r]) / static_cast<double>(total);
      }
    }
  });

  EvalReport report;
  report.queries = nq;
  report.database_size = ndb;
  report.truncate = options.truncate;
  report.radius = options.radius;
  report.ap.resize(nq);
  double ap_sum = 0.0, radius_sum = 0.0;
  for (std::size_t q = 0; q < nq; ++q) {
    report.ap[q] = per_query[q].ap;
    ap_sum += per_query[q].ap;
    radius_sum += per_query[q].radius_precision;
    report.zero_relevant_queries += per_query[q].no_relevant;
    report.empty_radius_queries += per_query[q].empty_radius;
  }
  if (nq == 0 || ndb == 0) return report;
  report.map = ap_sum / static_cast<double>(nq);
  report.precision_at_radius = radius_sum / static_cast<double>(nq);

  std::vector<double> hits(ndb, 0.0), recall(ndb, 0.0);
  for (const auto& s : sums) {
    for (std::size_t r = 0; r < ndb; ++r) {
      hits[r] += s.hits[r];
      recall[r] += s.recall[r];
    }
  }
  const double qd = static_cast<double>(nq);
  auto precision_at = [&](std::size_t n) { return hits[n - 1] / (static_cast<double>(n) * qd); };

  for (std::size_t n : options.topn)
    if (n >= 1 && n <= ndb) report.topn.emplace_back(n, precision_at(n));
  if (report.topn.empty() || report.topn.back().first != ndb)
    report.topn.emplace_back(ndb, precision_at(ndb));

  const std::size_t points = std::max<std::size_t>(1, std::min(options.max_pr_points, ndb));
  std::size_t last = 0;
  for (std::size_t j = 1; j <= points; ++j) {
    const std::size_t n = (j * ndb + points - 1) / points;
    if (n == last) continue;
    last = n;
    report.pr.push_back({n, recall[n - 1] / qd, precision_at(n)});
  }
  return report;
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "# retrieval evaluation report\n";
  out << "truncate = " << (report.truncate ? std::to_string(*report.truncate) : "none") << "\n";
  out << "queries = " << report.queries << "\n";
  out << "database_size = " << report.database_size << "\n";
  out << "map = " << report.map << "\n";
  out << "radius = " << report.radius << "\n";
  out << "precision_at_radius = " << report.precision_at_radius << "\n";
  out << "empty_radius_queries = " << report.empty_radius_queries << "\n";
  out << "zero_relevant_queries = " << report.zero_relevant_queries << "\n";
  for (const auto& [n, p] : report.topn) out << "precision_at_" << n << " = " << p << "\n";
}

void write_curves(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "ap.csv");
    out << "query,ap\n";
    for (std::size_t q = 0; q < report.ap.size(); ++q) out << q << "," << report.ap[q] << "\n";
  }
  {
    auto out = open_out(dir / "topn.csv");
    out << "rank,precision\n";
    for (const auto& [n, p] : report.topn) out << n << "," << p << "\n";
  }
  {
    auto out = open_out(dir / "pr.csv");
    out << "rank,recall,precision\n";
    for (const auto& pt : report.pr) out << pt.rank << "," << pt.recall << "," << pt.precision << "\n";
  }
}

}  // namespace dsdh
