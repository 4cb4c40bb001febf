#pragma once

#include <cstddef>
#include <exception>
#include <filesystem>
#include <optional>
#include <vector>

#include "dsdh/eval.hpp"
#include "dsdh/objective.hpp"
#include "dsdh/solver.hpp"

namespace dsdh {

struct TrainRun {
  HashModel model;
  std::vector<TermBreakdown> epochs;
};

// Trains from a config file, writes the model and a per-epoch log of the
// objective terms (one line per epoch).
TrainRun cmd_train(const std::filesystem::path& config_path);

struct EncodeArgs {
  std::filesystem::path model;
  std::filesystem::path features;
  DataFormat format = DataFormat::kCsv;
  std::filesystem::path out;
  bool use_trained_codes = false;
};
// Writes a code database with ids = row indices of the features file.
CodeDatabase cmd_encode(const EncodeArgs& args);

struct RetrieveArgs {
  std::filesystem::path database;
  std::filesystem::path model;
  std::filesystem::path queries;
  DataFormat format = DataFormat::kCsv;
  std::size_t top = 10;
  std::filesystem::path out;
};
// CSV: query,rank,id,distance.
void cmd_retrieve(const RetrieveArgs& args);

struct EvalArgs {
  std::filesystem::path database;
  std::filesystem::path database_labels;
  std::filesystem::path queries;
  std::filesystem::path query_labels;  // CSV; empty for binary query files
  std::filesystem::path model;
  DataFormat format = DataFormat::kCsv;
  std::optional<std::size_t> truncate;
  std::size_t radius = 2;
  std::filesystem::path report;
  std::filesystem::path curves_dir;  // empty: no CSV curves
};
EvalReport cmd_eval(const EvalArgs& args);

struct SplitArgs {
  std::filesystem::path features;
  std::filesystem::path labels;
  DataFormat format = DataFormat::kCsv;
  std::size_t queries_per_class = 0;
  std::size_t train_per_class = 0;
  std::uint64_t seed = 0;
  std::filesystem::path train_out;  // binary dataset files
  std::filesystem::path query_out;
};
void cmd_split(const SplitArgs& args);

// 0 success, 2 config error, 3 data error, 4 numerical divergence, 1 other.
int exit_code_for(const std::exception& e);

int run_cli(int argc, char** argv);

}  // namespace dsdh
