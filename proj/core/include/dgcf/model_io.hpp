#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dgcf/dataset.hpp"
#include "dgcf/model.hpp"

namespace dgcf {

enum class ModelKind : std::uint8_t { Ours = 0, LightGcn = 1, Bprmf = 2 };

std::string to_string(ModelKind k);

/// Everything needed to reproduce E* for one trained model.
///
/// Binary layout, little-endian:
///   "DGCF" | u8 version (1) | u8 kind
///   u64 m | u64 n | u64 d | u64 L
///   f64 alpha | f64 beta | u8 activation (0 identity, 1 relu)
///   u8 embedding mode (0 propagated, 1 free)
///   f64 layer_weights[L + 1]
///   f64 W[(m + n) * d], row-major
///   f64 W^(l)[d * d] for each of the L transforms (kind Ours only)
///   u32 CRC-32 of every preceding byte
/// For Bprmf, W is P stacked over Q and L = 0. For LightGcn, W is the free
/// table E^(0).
struct ModelFile {
  ModelKind kind = ModelKind::Ours;
  Index users = 0;
  Index items = 0;
  Hyperparams hyper;
  ModelParams params;

  /// E* for ranking. s must be the normalized Laplacian of the training graph
  /// (unused for Bprmf).
  DenseMatrix combined(const SparseMatrix& s) const;
};

inline constexpr std::uint8_t kModelFormatVersion = 1;

std::string serialize_model(const ModelFile& model);
ModelFile deserialize_model(std::string_view bytes);

void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace dgcf
