#include "dsdh/encoder.hpp"

#include <cmath>
#include <string>

#include "dsdh/error.hpp"
#include "dsdh/rng.hpp"

namespace dsdh {

namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kTanh:
      return std::tanh(z);
  }
  return z;
}

// Derivative expressed through the pre-activation z.
double activate_grad(Activation a, double z) {
  switch (a) {
    case Activation::kRelu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

void add_bias(Matrix& z, std::span<const double> bias) {
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (double& v : z.row(r)) v += bias[r];
}

std::vector<double> row_sums(const Matrix& m) {
  std::vector<double> s(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (double v : m.row(r)) s[r] += v;
  return s;
}

Matrix glorot(std::size_t fan_out, std::size_t fan_in, SplitMix64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_out, fan_in);
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return w;
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation \"" + std::string(name) + "\" (expected relu or tanh)");
}

std::string_view activation_name(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

std::vector<std::size_t> EncoderParams::shape() const {
  std::vector<std::size_t> s;
  if (layers.empty()) return s;
  s.push_back(layers.front().in());
  for (const auto& l : layers) s.push_back(l.out());
  return s;
}

void EncoderParams::validate() const {
  if (layers.empty()) throw DimensionError("encoder has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].bias.size() != layers[l].out()) {
      throw DimensionError("layer " + std::to_string(l) + ": bias length " +
                           std::to_string(layers[l].bias.size()) + " for weight " +
                           layers[l].weight.shape_string());
    }
    if (l > 0 && layers[l].in() != layers[l - 1].out()) {
      throw DimensionError("layer " + std::to_string(l) + " expects input width " +
                           std::to_string(layers[l].in()) + " but layer " +
                           std::to_string(l - 1) + " outputs " +
                           std::to_string(layers[l - 1].out()));
    }
  }
}

ForwardResult forward(const EncoderParams& params, const HashLayer& hash, const Matrix& x) {
  params.validate();
  if (x.rows() != params.input_dim()) {
    throw DimensionError("forward: input has " + std::to_string(x.rows()) +
                         " rows, encoder expects " + std::to_string(params.input_dim()));
  }
  if (hash.m.rows() != params.feature_dim() || hash.n.size() != hash.bits()) {
    throw DimensionError("forward: hash layer " + hash.m.shape_string() +
                         " does not match feature dim " + std::to_string(params.feature_dim()));
  }

  ForwardResult out;
  Matrix a = x;
  for (const auto& layer : params.layers) {
    Matrix z = matmul(layer.weight, a);
    add_bias(z, layer.bias);
    out.cache.inputs.push_back(std::move(a));
    a = Matrix(z.rows(), z.cols());
    auto zv = z.values();
    auto av = a.values();
    for (std::size_t i = 0; i < zv.size(); ++i) av[i] = activate(params.activation, zv[i]);
    out.cache.preactivations.push_back(std::move(z));
  }
  out.h = matmul_tn(hash.m, a);
  add_bias(out.h, hash.n);
  out.cache.features = a;
  out.features = std::move(a);
  return out;
}

Matrix hash_outputs(const EncoderParams& params, const HashLayer& hash, const Matrix& x) {
  return forward(params, hash, x).h;
}

EncoderGradients backward(const EncoderParams& params, const HashLayer& hash,
                          const ForwardCache& cache, const Matrix& dF_dh,
                          const Matrix& dF_dfeatures) {
  const std::size_t batch = cache.features.cols();
  if (dF_dh.rows() != hash.bits() || dF_dh.cols() != batch) {
    throw DimensionError("backward: dF/dh is " + dF_dh.shape_string() + ", expected " +
                         std::to_string(hash.bits()) + "x" + std::to_string(batch));
  }
  if (cache.inputs.size() != params.layers.size()) {
    throw DimensionError("backward: cache does not match encoder depth");
  }

  EncoderGradients g;
  // dF/dM = Theta * (dF/dh)^T, dF/dn = sum over batch of dF/dh.
  g.hash.m = matmul_nt(cache.features, dF_dh);
  g.hash.n = row_sums(dF_dh);

  // dF/dTheta = M * dF/dh
  Matrix upstream = matmul(hash.m, dF_dh);
  if (!dF_dfeatures.empty()) {
    if (dF_dfeatures.rows() != upstream.rows() || dF_dfeatures.cols() != upstream.cols()) {
      throw DimensionError("backward: feature gradient is " + dF_dfeatures.shape_string() +
                           ", expected " + upstream.shape_string());
    }
    upstream += dF_dfeatures;
  }

  g.layers.resize(params.layers.size());
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Matrix& z = cache.preactivations[l];
    auto uv = upstream.values();
    auto zv = z.values();
    for (std::size_t i = 0; i < uv.size(); ++i) uv[i] *= activate_grad(params.activation, zv[i]);
    g.layers[l].weight = matmul_nt(upstream, cache.inputs[l]);
    g.layers[l].bias = row_sums(upstream);
    if (l > 0) upstream = matmul_tn(params.layers[l].weight, upstream);
  }
  return g;
}

InitResult init_encoder(std::span<const std::size_t> shape, std::size_t bits,
                        Activation activation, std::uint64_t seed) {
  if (shape.size() < 2) {
    throw ConfigError("encoder shape needs an input width and at least one layer width");
  }
  if (bits == 0) throw ConfigError("hash layer needs at least one bit");
  for (std::size_t w : shape)
    if (w == 0) throw ConfigError("encoder layer widths must be positive");

  SplitMix64 rng(seed);
  InitResult out;
  out.params.activation = activation;
  for (std::size_t l = 0; l + 1 < shape.size(); ++l) {
    DenseLayer layer;
    layer.weight = glorot(shape[l + 1], shape[l], rng);
    layer.bias.assign(shape[l + 1], 0.0);
    out.params.layers.push_back(std::move(layer));
  }
  // Stored as f x K; the fan sizes are the same either way.
  out.hash.m = glorot(bits, shape.back(), rng).transpose();
  out.hash.n.assign(bits, 0.0);
  return out;
}

std::vector<std::span<double>> parameter_views(EncoderParams& params, HashLayer& hash) {
  std::vector<std::span<double>> v;
  for (auto& l : params.layers) {
    v.emplace_back(l.weight.values());
    v.emplace_back(l.bias);
  }
  v.emplace_back(hash.m.values());
  v.emplace_back(hash.n);
  return v;
}

std::vector<std::span<double>> parameter_views(EncoderGradients& grads) {
  std::vector<std::span<double>> v;
  for (auto& l : grads.layers) {
    v.emplace_back(l.weight.values());
    v.emplace_back(l.bias);
  }
  v.emplace_back(grads.hash.m.values());
  v.emplace_back(grads.hash.n);
  return v;
}

}  // namespace dsdh
