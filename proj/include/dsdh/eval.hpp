#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dsdh/data.hpp"
#include "dsdh/retrieval.hpp"

namespace dsdh {

// Average precision of a ranked relevance list (entries 0/1).
//
// With T = truncate (or the list length), AP is the mean of precision@k over
// the relevant positions k <= T, divided by the number of relevant items in
// the top T. Zero when the top T holds no relevant item.
double average_precision(std::span<const std::uint8_t> relevance,
                         std::optional<std::size_t> truncate = std::nullopt);

struct PrPoint {
  std::size_t rank;
  double recall;
  double precision;
};

struct EvalOptions {
  std::optional<std::size_t> truncate;  // MAP cut-off, e.g. 5000
  std::size_t radius = 2;
  std::size_t max_pr_points = 200;
  std::vector<std::size_t> topn = {1,   5,   10,  20,  50,  100, 200, 300,
                                   400, 500, 600, 700, 800, 900, 1000};
};

struct EvalReport {
  double map = 0.0;
  std::vector<double> ap;  // per query
  double precision_at_radius = 0.0;
  std::size_t radius = 2;
  std::vector<std::pair<std::size_t, double>> topn;  // (n, mean precision@n)
  std::vector<PrPoint> pr;                           // mean over queries at each rank
  std::size_t queries = 0;
  std::size_t database_size = 0;
  std::size_t zero_relevant_queries = 0;
  std::size_t empty_radius_queries = 0;
  std::optional<std::size_t> truncate;
};

// Relevance of a database item to a query: they share at least one label.
// `db_labels` is aligned with database insertion order; `query_codes` is a
// K x Q matrix of +-1 codes aligned with `query_labels`.
EvalReport evaluate(const CodeDatabase& db, const LabelMatrix& db_labels,
                    const Matrix& query_codes, const LabelMatrix& query_labels,
                    const EvalOptions& options = {});

// Flat `key = value` text.
void write_report(const EvalReport& report, const std::filesystem::path& path);
// ap.csv, topn.csv and pr.csv in `dir`.
void write_curves(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace dsdh
