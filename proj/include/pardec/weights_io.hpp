#pragma once

// Weight container, version 1 (all integers little-endian):
//
//   offset  size  field
//   0       8     magic "PDJACOBI"
//   8       4     u32 format version (1)
//   12      4     u32 byte length of the spec block (64)
//   16      64    spec block: u64 vocab_size, d_model, n_layers, n_heads,
//                 d_ff, max_seq, seed, init (0 uniform, 1 zero)
//   80      4*P   float32 tensors, row-major, in ToyModel::for_each_tensor order
//
// P = V*d + S*d + L*(4*d*d + 2*d*F) + d*V. A sidecar `<file>.json` manifest
// holds the spec fields, the whole-file checksum and one checksum per tensor
// (FNV-1a 64 over the tensor's bytes, lower-case hex).

#include <cstdint>
#include <filesystem>
#include <string>

#include "pardec/model.hpp"

namespace pardec {

constexpr char kWeightMagic[8] = {'P', 'D', 'J', 'A', 'C', 'O', 'B', 'I'};
constexpr std::uint32_t kWeightFormatVersion = 1;
constexpr std::size_t kWeightHeaderBytes = 16;
constexpr std::size_t kSpecBlockBytes = 64;

/// Exact file size for a spec.
inline std::size_t weight_file_size(const ModelSpec& spec) {
  return kWeightHeaderBytes + kSpecBlockBytes + 4 * parameter_count(spec);
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t n, std::uint64_t h = 0xCBF29CE484222325ULL);
std::string hex64(std::uint64_t v);

std::filesystem::path manifest_path(const std::filesystem::path& weights);

struct WeightFileInfo {
  std::uint64_t file_checksum = 0;
  std::uint64_t weight_checksum = 0;
  std::size_t bytes = 0;
};

/// Writes the container and its sidecar manifest.
WeightFileInfo save_weights(const ToyModel& model, const std::filesystem::path& path);

/// Loads a container. When `require_manifest` is set the sidecar must exist
/// and every checksum in it must match; otherwise the load is refused.
ToyModel load_weights(const std::filesystem::path& path, bool require_manifest = true);

}  // namespace pardec
