#pragma once

#include <filesystem>

#include "dsdh/solver.hpp"

namespace dsdh {

// "DSDH" model file, little-endian:
//   magic, u32 version, u32 d, u32 feature_dim, u32 K, u32 c,
//   u32 activation (0 relu, 1 tanh), u32 layer count L, (L + 1) u32 widths,
//   f64 mean[d], f64 scale[d],
//   per layer: f64 weight (out x in, row-major), f64 bias[out],
//   f64 M (feature_dim x K), f64 n[K], f64 W (K x c),
//   u32 has_codes, then if set: u32 N and N x (u64 id, ceil(K/64) u64 words).
void save_model(const HashModel& model, const std::filesystem::path& path);
HashModel load_model(const std::filesystem::path& path);

}  // namespace dsdh
