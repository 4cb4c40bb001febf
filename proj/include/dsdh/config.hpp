#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dsdh/data.hpp"
#include "dsdh/objective.hpp"
#include "dsdh/solver.hpp"

namespace dsdh {

// Training run configuration, read from a flat `key = value` file.
//
// Recognized keys (defaults in parentheses):
//   features, labels      dataset paths (required; labels unused for binary)
//   format                csv | binary (csv)
//   model                 output model path (required)
//   log                   training log path (<model>.log)
//   mu, nu, eta           objective weights (1, 0.1, 55)
//   bits                  code length K (12)
//   hidden                comma-separated hidden widths (64,64)
//   activation            relu | tanh (relu)
//   standardize           true | false (true)
//   epochs                (50)
//   steps_per_epoch       0 = one pass over the data (0)
//   batch_size            (32)
//   learning_rate         (0.0003)
//   lr_decay              factor applied every quarter of the epochs (0.5)
//   dcc_max_sweeps        (10)
//   variant               full | A | B | C (full)
//   seed                  (0)
// Relative paths resolve against the directory holding the config file.
struct RunConfig {
  std::filesystem::path features;
  std::filesystem::path labels;
  DataFormat format = DataFormat::kCsv;
  std::filesystem::path model;
  std::filesystem::path log;
  Hyperparams hp;
  Schedule schedule;
  EncoderConfig encoder;
  Variant variant = Variant::kFull;
  std::uint64_t seed = 0;
};

// Throws ConfigError naming the offending key (and line) for unknown keys,
// duplicates, malformed values or missing required keys.
RunConfig parse_config(std::string_view text,
                       const std::filesystem::path& base_dir = std::filesystem::path());
RunConfig load_config(const std::filesystem::path& path);

}  // namespace dsdh
