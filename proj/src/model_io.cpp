#include "dsdh/model_io.hpp"

#include <fstream>
#include <string>

#include "dsdh/binary_io.hpp"
#include "dsdh/error.hpp"
#include "dsdh/retrieval.hpp"

namespace dsdh {

namespace {

constexpr std::string_view kModelMagic = "DSDH";
constexpr std::uint32_t kModelVersion = 1;

void write_values(io::Writer& w, std::span<const double> values) {
  for (double v : values) w.f64(v);
}

void read_values(io::Reader& r, std::span<double> values, const char* what) {
  for (double& v : values) v = r.f64(what);
}

std::uint32_t narrow(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw DataError(std::string("model field too large: ") + what);
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void save_model(const HashModel& model, const std::filesystem::path& path) {
  model.encoder.validate();
  const std::size_t d = model.input_dim();
  const std::size_t f = model.encoder.feature_dim();
  const std::size_t k = model.bits();
  const std::size_t c = model.classes();
  if (model.standardizer.dim() != d || model.hash.m.rows() != f || model.w.rows() != k ||
      model.hash.n.size() != k) {
    throw DimensionError("save_model: inconsistent model dimensions");
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  io::Writer w(out);
  w.magic(kModelMagic);
  w.u32(kModelVersion);
  w.u32(narrow(d, "d"));
  w.u32(narrow(f, "feature_dim"));
  w.u32(narrow(k, "K"));
  w.u32(narrow(c, "c"));
  w.u32(model.encoder.activation == Activation::kRelu ? 0 : 1);
  w.u32(narrow(model.encoder.layers.size(), "layers"));
  for (std::size_t width : model.encoder.shape()) w.u32(narrow(width, "width"));
  write_values(w, model.standardizer.mean);
  write_values(w, model.standardizer.scale);
  for (const auto& layer : model.encoder.layers) {
    write_values(w, layer.weight.values());
    write_values(w, layer.bias);
  }
  write_values(w, model.hash.m.values());
  write_values(w, model.hash.n);
  write_values(w, model.w.values());

  const bool has_codes = !model.codes.empty();
  w.u32(has_codes ? 1 : 0);
  if (has_codes) {
    if (model.codes.rows() != k || model.code_ids.size() != model.codes.cols()) {
      throw DimensionError("save_model: training codes do not match K or ids");
    }
    w.u32(narrow(model.codes.cols(), "N"));
    for (std::size_t i = 0; i < model.codes.cols(); ++i) {
      w.u64(model.code_ids[i]);
      for (std::uint64_t word : pack(model.codes.col(i)).words) w.u64(word);
    }
  }
  if (!w.ok()) throw DataError("write failed: " + path.string());
}

HashModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  io::Reader r(in, path.string());
  r.expect_magic(kModelMagic);
  const std::uint32_t version = r.u32("version");
  if (version != kModelVersion) r.fail("unsupported model version " + std::to_string(version));
  const std::size_t d = r.u32("d");
  const std::size_t f = r.u32("feature_dim");
  const std::size_t k = r.u32("K");
  const std::size_t c = r.u32("c");
  const std::uint32_t act = r.u32("activation");
  if (act > 1) r.fail("unknown activation code " + std::to_string(act));
  const std::size_t layers = r.u32("layer count");
  if (layers == 0) r.fail("model has no encoder layers");
  std::vector<std::size_t> widths(layers + 1);
  for (auto& wd : widths) wd = r.u32("layer width");
  if (widths.front() != d || widths.back() != f || k == 0) r.fail("inconsistent model dimensions");

  HashModel m;
  m.encoder.activation = act == 0 ? Activation::kRelu : Activation::kTanh;
  m.standardizer.mean.resize(d);
  m.standardizer.scale.resize(d);
  read_values(r, m.standardizer.mean, "standardizer mean");
  read_values(r, m.standardizer.scale, "standardizer scale");
  for (std::size_t l = 0; l < layers; ++l) {
    DenseLayer layer{Matrix(widths[l + 1], widths[l]), std::vector<double>(widths[l + 1])};
    read_values(r, layer.weight.values(), "layer weight");
    read_values(r, layer.bias, "layer bias");
    m.encoder.layers.push_back(std::move(layer));
  }
  m.hash.m = Matrix(f, k);
  m.hash.n.resize(k);
  read_values(r, m.hash.m.values(), "hash weight");
  read_values(r, m.hash.n, "hash bias");
  m.w = Matrix(k, c);
  read_values(r, m.w.values(), "classifier");

  const std::uint32_t has_codes = r.u32("code flag");
  if (has_codes > 1) r.fail("bad code flag");
  if (has_codes) {
    const std::size_t n = r.u32("code count");
    m.codes = Matrix(k, n);
    m.code_ids.resize(n);
    PackedCode code{k, std::vector<std::uint64_t>(words_for_bits(k))};
    for (std::size_t i = 0; i < n; ++i) {
      m.code_ids[i] = r.u64("code id");
      for (auto& word : code.words) word = r.u64("code word");
      m.codes.set_col(i, unpack(code));
    }
  }
  r.expect_end();
  return m;
}

}  // namespace dsdh
