#include "dsdh/commands.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <string>

#include "CLI11.hpp"
#include "dsdh/config.hpp"
#include "dsdh/error.hpp"
#include "dsdh/model_io.hpp"
#include "dsdh/retrieval.hpp"

namespace dsdh {

namespace {

LabelMatrix load_labels(const std::filesystem::path& path, DataFormat format) {
  if (format == DataFormat::kCsv) return load_labels_csv(path);
  return load_dataset_binary(path).labels;
}

Matrix encode_features(const HashModel& model, const Matrix& features) {
  if (features.rows() != model.input_dim()) {
    throw DimensionError("features have " + std::to_string(features.rows()) +
                         " dimensions, model expects " + std::to_string(model.input_dim()));
  }
  return model.encode(features);
}

}  // namespace

TrainRun cmd_train(const std::filesystem::path& config_path) {
  const RunConfig cfg = load_config(config_path);
  const Dataset data = load_dataset(cfg.features, cfg.labels, cfg.format);

  std::ofstream log(cfg.log, std::ios::trunc);
  if (!log) throw DataError("cannot write log " + cfg.log.string());
  log << std::setprecision(std::numeric_limits<double>::max_digits10);

  TrainRun run;
  TrainOptions options;
  options.variant = cfg.variant;
  options.encoder = cfg.encoder;
  options.seed = cfg.seed;
  options.on_epoch = [&](const EpochInfo& info) {
    const SimilarityOracle oracle(info.train.labels);
    const TermBreakdown t = total_objective(info.state.h, info.state.b, info.state.w,
                                            info.train.labels.to_matrix(), oracle, cfg.hp);
    if (!std::isfinite(t.total)) {
      throw DivergenceError("non-finite objective at epoch " + std::to_string(info.epoch));
    }
    run.epochs.push_back(t);
    log << "epoch=" << info.epoch << " lr=" << info.learning_rate << " pairwise=" << t.pairwise
        << " classification=" << t.classification << " regularizer=" << t.regularizer
        << " quantization=" << t.quantization << " total=" << t.total << "\n";
    log.flush();
  };
  run.model = train(data, cfg.hp, cfg.schedule, options);
  save_model(run.model, cfg.model);
  return run;
}

CodeDatabase cmd_encode(const EncodeArgs& args) {
  const HashModel model = load_model(args.model);
  const Matrix features = load_features(args.features, args.format);
  Matrix codes = encode_features(model, features);
  if (args.use_trained_codes && !model.codes.empty()) {
    std::unordered_map<std::uint64_t, std::size_t> trained;
    for (std::size_t i = 0; i < model.code_ids.size(); ++i) trained[model.code_ids[i]] = i;
    for (std::size_t i = 0; i < codes.cols(); ++i) {
      const auto it = trained.find(i);
      if (it != trained.end()) codes.set_col(i, model.codes.col(it->second));
    }
  }
  std::vector<std::uint64_t> ids(codes.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  CodeDatabase db = CodeDatabase::from_codes(codes, ids);
  save_database(db, args.out);
  return db;
}

void cmd_retrieve(const RetrieveArgs& args) {
  const CodeDatabase db = load_database(args.database);
  const HashModel model = load_model(args.model);
  if (db.bits() != model.bits()) {
    throw DimensionError("database has " + std::to_string(db.bits()) + "-bit codes, model " +
                         std::to_string(model.bits()));
  }
  const Matrix codes = encode_features(model, load_features(args.queries, args.format));
  std::ofstream out(args.out, std::ios::trunc);
  if (!out) throw DataError("cannot write " + args.out.string());
  out << "query,rank,id,distance\n";
  for (std::size_t q = 0; q < codes.cols(); ++q) {
    const auto ranking = rank(db, pack(codes.col(q)));
    const std::size_t n = std::min(args.top, ranking.size());
    for (std::size_t r = 0; r < n; ++r)
      out << q << "," << r + 1 << "," << ranking[r].id << "," << ranking[r].distance << "\n";
  }
}

EvalReport cmd_eval(const EvalArgs& args) {
  for (const auto* p : {&args.database, &args.database_labels, &args.queries, &args.model}) {
    if (!std::filesystem::exists(*p)) throw DataError("missing file " + p->string());
  }
  const CodeDatabase db = load_database(args.database);
  const LabelMatrix db_labels = load_labels(args.database_labels, args.format);
  const HashModel model = load_model(args.model);
  const Matrix query_codes = encode_features(model, load_features(args.queries, args.format));
  const LabelMatrix query_labels = args.query_labels.empty()
                                       ? load_labels(args.queries, args.format)
                                       : load_labels(args.query_labels, args.format);
  EvalOptions options;
  options.truncate = args.truncate;
  options.radius = args.radius;
  const EvalReport report = evaluate(db, db_labels, query_codes, query_labels, options);
  if (!args.report.empty()) write_report(report, args.report);
  if (!args.curves_dir.empty()) write_curves(report, args.curves_dir);
  return report;
}

void cmd_split(const SplitArgs& args) {
  const Dataset data = load_dataset(args.features, args.labels, args.format);
  const SplitResult parts = split(data, args.queries_per_class, args.train_per_class, args.seed);
  save_dataset_binary(parts.train, args.train_out);
  save_dataset_binary(parts.query, args.query_out);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const DimensionError*>(&e)) return 3;
  return 1;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Supervised discrete hashing: train, encode, retrieve, evaluate"};
  app.require_subcommand(1);

  const std::map<std::string, DataFormat> formats{{"csv", DataFormat::kCsv},
                                                  {"binary", DataFormat::kBinary}};

  std::filesystem::path config;
  auto* train_cmd = app.add_subcommand("train", "Train a hash model from a config file");
  train_cmd->add_option("config", config, "Config file (key = value lines)")->required();

  EncodeArgs enc;
  auto* encode_cmd = app.add_subcommand("encode", "Encode features into a code database");
  encode_cmd->add_option("--model", enc.model)->required();
  encode_cmd->add_option("--features", enc.features)->required();
  encode_cmd->add_option("--format", enc.format)->transform(CLI::CheckedTransformer(formats));
  encode_cmd->add_option("--out", enc.out)->required();
  encode_cmd->add_flag("--use-trained-codes", enc.use_trained_codes,
                       "Use the model's stored training codes for matching ids");

  RetrieveArgs ret;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Top-N Hamming neighbours per query");
  retrieve_cmd->add_option("--db", ret.database)->required();
  retrieve_cmd->add_option("--model", ret.model)->required();
  retrieve_cmd->add_option("--queries", ret.queries)->required();
  retrieve_cmd->add_option("--format", ret.format)->transform(CLI::CheckedTransformer(formats));
  retrieve_cmd->add_option("--top", ret.top, "Neighbours per query")->capture_default_str();
  retrieve_cmd->add_option("--out", ret.out)->required();

  EvalArgs ev;
  std::size_t truncate = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate retrieval quality");
  eval_cmd->add_option("--db", ev.database)->required();
  eval_cmd->add_option("--db-labels", ev.database_labels)->required();
  eval_cmd->add_option("--queries", ev.queries)->required();
  eval_cmd->add_option("--query-labels", ev.query_labels);
  eval_cmd->add_option("--model", ev.model)->required();
  eval_cmd->add_option("--format", ev.format)->transform(CLI::CheckedTransformer(formats));
  auto* truncate_opt = eval_cmd->add_option("--truncate", truncate, "MAP over the top T only");
  eval_cmd->add_option("--radius", ev.radius)->capture_default_str();
  eval_cmd->add_option("--report", ev.report)->required();
  eval_cmd->add_option("--curves", ev.curves_dir, "Directory for ap/topn/pr CSV files");

  SplitArgs sp;
  auto* split_cmd = app.add_subcommand("split", "Per-class query/train split");
  split_cmd->add_option("--features", sp.features)->required();
  split_cmd->add_option("--labels", sp.labels);
  split_cmd->add_option("--format", sp.format)->transform(CLI::CheckedTransformer(formats));
  split_cmd->add_option("--queries-per-class", sp.queries_per_class)->required();
  split_cmd->add_option("--train-per-class", sp.train_per_class)->required();
  split_cmd->add_option("--seed", sp.seed);
  split_cmd->add_option("--train-out", sp.train_out)->required();
  split_cmd->add_option("--query-out", sp.query_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) {
      const TrainRun run = cmd_train(config);
      std::cout << "trained " << run.epochs.size() << " epochs\n";
    } else if (*encode_cmd) {
      const CodeDatabase db = cmd_encode(enc);
      std::cout << "encoded " << db.size() << " items with " << db.bits() << " bits\n";
    } else if (*retrieve_cmd) {
      cmd_retrieve(ret);
    } else if (*eval_cmd) {
      if (truncate_opt->count() > 0) ev.truncate = truncate;
      const EvalReport report = cmd_eval(ev);
      std::cout << "map = " << report.map << "\n";
    } else if (*split_cmd) {
      cmd_split(sp);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}

}  // namespace dsdh
