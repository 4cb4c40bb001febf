#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dsdh/matrix.hpp"

namespace dsdh {

enum class Activation { kRelu, kTanh };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation a);

struct DenseLayer {
  Matrix weight;              // out x in
  std::vector<double> bias;   // out

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }
  bool operator==(const DenseLayer&) const = default;
};

// Feature network Theta(x; theta): a stack of dense layers, each followed by
// the activation. The width of the last layer is the feature dimension.
struct EncoderParams {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::kRelu;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in(); }
  std::size_t feature_dim() const { return layers.empty() ? 0 : layers.back().out(); }
  // Input width followed by every layer's output width.
  std::vector<std::size_t> shape() const;
  // Throws DimensionError if the layer shapes do not chain.
  void validate() const;

  bool operator==(const EncoderParams&) const = default;
};

// Last fully connected layer: h = M^T * Theta + n.
struct HashLayer {
  Matrix m;                // feature_dim x K
  std::vector<double> n;   // K

  std::size_t bits() const { return m.cols(); }
  bool operator==(const HashLayer&) const = default;
};

struct ForwardCache {
  std::vector<Matrix> inputs;       // input to each layer (inputs[0] = x)
  std::vector<Matrix> preactivations;
  Matrix features;                  // Theta, feature_dim x batch
};

struct ForwardResult {
  Matrix features;  // feature_dim x batch
  Matrix h;         // K x batch
  ForwardCache cache;
};

struct EncoderGradients {
  std::vector<DenseLayer> layers;
  HashLayer hash;
};

ForwardResult forward(const EncoderParams& params, const HashLayer& hash, const Matrix& x);

// Hash-layer outputs only (no cache), for encoding.
Matrix hash_outputs(const EncoderParams& params, const HashLayer& hash, const Matrix& x);

// Gradients of a scalar F with respect to every parameter, given dF/dh for
// the batch in `cache`. `dF_dfeatures`, when non-empty, is an additional
// gradient arriving directly at Theta (from a second head on the same
// features). All gradients are summed over the batch.
EncoderGradients backward(const EncoderParams& params, const HashLayer& hash,
                          const ForwardCache& cache, const Matrix& dF_dh,
                          const Matrix& dF_dfeatures = Matrix());

// `shape` lists the input width then each layer width: {d, h1, ..., f}.
// Weights are Glorot-uniform, biases zero. The hash layer is f x bits.
struct InitResult {
  EncoderParams params;
  HashLayer hash;
};
InitResult init_encoder(std::span<const std::size_t> shape, std::size_t bits,
                        Activation activation, std::uint64_t seed);

// Flat views over every parameter tensor in a fixed order: for each layer
// (weight, bias), then M, then n. The gradient overload yields the matching
// order so the two can be zipped.
std::vector<std::span<double>> parameter_views(EncoderParams& params, HashLayer& hash);
std::vector<std::span<double>> parameter_views(EncoderGradients& grads);

}  // namespace dsdh
