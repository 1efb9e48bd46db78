#include "dgcf/model_io.hpp"

#include <bit>
#include <cstring>

#include <zlib.h>

#include "dgcf/baselines.hpp"
#include "dgcf/io.hpp"

namespace dgcf {

namespace {

constexpr char kMagic[4] = {'D', 'G', 'C', 'F'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) u8(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) u8(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void matrix(const DenseMatrix& m) {
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : in_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(u8()) << (8 * b);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(u8()) << (8 * b);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  DenseMatrix matrix(Index rows, Index cols) {
    need(static_cast<std::size_t>(rows * cols) * 8);
    DenseMatrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = f64();
    return m;
  }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw UserError("model file truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Ours: return "ours";
    case ModelKind::LightGcn: return "lightgcn";
    case ModelKind::Bprmf: return "bprmf";
  }
  return "unknown";
}

DenseMatrix ModelFile::combined(const SparseMatrix& s) const {
  switch (kind) {
    case ModelKind::Bprmf: return params.base;
    case ModelKind::LightGcn: return lightgcn_forward(params.base, s, hyper.layers);
    case ModelKind::Ours: return forward(params, s, hyper, users, items).combined;
  }
  throw std::logic_error("unknown model kind");
}

std::string serialize_model(const ModelFile& model) {
  const Index d = model.hyper.dim;
  const Index L = model.hyper.layers;
  require(model.params.base.rows() == model.users + model.items && model.params.base.cols() == d,
          "serialize_model: W has shape " + shape_str(model.params.base));
  const std::size_t transforms = model.kind == ModelKind::Ours ? static_cast<std::size_t>(L) : 0;
  require(model.params.transforms.size() == transforms,
          "serialize_model: transform count does not match model kind");
  const auto weights = model.hyper.resolved_layer_weights();

  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(kModelFormatVersion);
  w.u8(static_cast<std::uint8_t>(model.kind));
  w.u64(static_cast<std::uint64_t>(model.users));
  w.u64(static_cast<std::uint64_t>(model.items));
  w.u64(static_cast<std::uint64_t>(d));
  w.u64(static_cast<std::uint64_t>(L));
  w.f64(model.hyper.alpha);
  w.f64(model.hyper.beta);
  w.u8(model.hyper.activation == Activation::Relu ? 1 : 0);
  w.u8(model.hyper.embedding_mode == EmbeddingMode::Free ? 1 : 0);
  for (double a : weights) w.f64(a);
  w.matrix(model.params.base);
  for (const auto& t : model.params.transforms) {
    require(t.rows() == d && t.cols() == d, "serialize_model: transform must be d x d");
    w.matrix(t);
  }
  const std::uint32_t crc = crc32_of(w.bytes());
  w.u32(crc);
  return std::move(w.bytes());
}

ModelFile deserialize_model(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw UserError("not a model file (bad magic)");
  if (bytes.size() < 8) throw UserError("model file truncated");
  const std::uint32_t stored = [&] {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[bytes.size() - 4 + b]))
           << (8 * b);
    return v;
  }();
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  if (crc32_of(body) != stored) throw UserError("model file checksum mismatch");

  Reader r(body);
  for (int k = 0; k < 4; ++k) r.u8();
  const std::uint8_t version = r.u8();
  if (version != kModelFormatVersion)
    throw UserError("unsupported model file version " + std::to_string(version));
  const std::uint8_t kind = r.u8();
  if (kind > 2) throw UserError("unknown model kind tag " + std::to_string(kind));

  ModelFile model;
  model.kind = static_cast<ModelKind>(kind);
  model.users = static_cast<Index>(r.u64());
  model.items = static_cast<Index>(r.u64());
  model.hyper.dim = static_cast<Index>(r.u64());
  model.hyper.layers = static_cast<Index>(r.u64());
  const Index d = model.hyper.dim;
  const Index L = model.hyper.layers;
  if (model.users < 0 || model.items < 0 || d < 1 || L < 0 || L > 4096 ||
      static_cast<std::size_t>(model.users + model.items) * static_cast<std::size_t>(d) * 8 >
          body.size())
    throw UserError("model file header has implausible dimensions");
  model.hyper.alpha = r.f64();
  model.hyper.beta = r.f64();
  model.hyper.activation = r.u8() == 1 ? Activation::Relu : Activation::Identity;
  model.hyper.embedding_mode = r.u8() == 1 ? EmbeddingMode::Free : EmbeddingMode::Propagated;
  model.hyper.layer_weights.resize(static_cast<std::size_t>(L + 1));
  for (auto& a : model.hyper.layer_weights) a = r.f64();
  model.params.base = r.matrix(model.users + model.items, d);
  if (model.kind == ModelKind::Ours)
    for (Index l = 0; l < L; ++l) model.params.transforms.push_back(r.matrix(d, d));
  if (r.position() != body.size()) throw UserError("model file has trailing bytes");
  return model;
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(model));
}

ModelFile load_model(const std::filesystem::path& path) {
  try {
    return deserialize_model(read_file(path));
  } catch (const UserError& e) {
    throw UserError(path.string() + ": " + e.what());
  }
}

}  // namespace dgcf
