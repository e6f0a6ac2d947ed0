#include "pardec/weights_io.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <vector>

namespace pardec {

static_assert(std::endian::native == std::endian::little, "weight I/O assumes a little-endian host");

namespace {

using json = nlohmann::json;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

json spec_json(const ModelSpec& s) {
  return {{"vocab_size", s.vocab_size}, {"d_model", s.d_model}, {"n_layers", s.n_layers},
          {"n_heads", s.n_heads},       {"d_ff", s.d_ff},       {"max_seq", s.max_seq},
          {"seed", s.seed},             {"init", s.init == WeightInit::Zero ? "zero" : "uniform"}};
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::uint64_t fnv1a_bytes(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::filesystem::path manifest_path(const std::filesystem::path& weights) {
  auto p = weights;
  p += ".json";
  return p;
}

WeightFileInfo save_weights(const ToyModel& model, const std::filesystem::path& path) {
  const auto& s = model.spec();
  std::vector<unsigned char> bytes;
  bytes.reserve(weight_file_size(s));
  bytes.insert(bytes.end(), std::begin(kWeightMagic), std::end(kWeightMagic));
  put_u32(bytes, kWeightFormatVersion);
  put_u32(bytes, static_cast<std::uint32_t>(kSpecBlockBytes));
  for (std::uint64_t v : {std::uint64_t{s.vocab_size}, std::uint64_t{s.d_model}, std::uint64_t{s.n_layers},
                          std::uint64_t{s.n_heads}, std::uint64_t{s.d_ff}, std::uint64_t{s.max_seq}, s.seed,
                          std::uint64_t{static_cast<std::uint8_t>(s.init)}})
    put_u64(bytes, v);

  json tensors = json::array();
  model.for_each_tensor([&](std::string_view name, std::uint64_t layer, const auto& t) {
    const auto* p = reinterpret_cast<const unsigned char*>(t.data());
    const std::size_t n = static_cast<std::size_t>(t.size()) * sizeof(float);
    tensors.push_back({{"name", std::string(name)},
                       {"layer", layer == ToyModel::kGlobalLayer ? json(nullptr) : json(layer)},
                       {"rows", t.rows()},
                       {"cols", t.cols()},
                       {"offset", bytes.size()},
                       {"checksum", hex64(fnv1a_bytes(p, n))}});
    bytes.insert(bytes.end(), p, p + n);
  });

  WeightFileInfo info;
  info.bytes = bytes.size();
  info.file_checksum = fnv1a_bytes(bytes.data(), bytes.size());
  info.weight_checksum = weight_checksum(model);

  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
  }
  json manifest = {{"format", "pardec-weights"},
                   {"version", kWeightFormatVersion},
                   {"spec", spec_json(s)},
                   {"bytes", info.bytes},
                   {"file_checksum", hex64(info.file_checksum)},
                   {"weight_checksum", hex64(info.weight_checksum)},
                   {"tensors", std::move(tensors)}};
  std::ofstream out(manifest_path(path), std::ios::trunc);
  if (!out) throw IoError("cannot write " + manifest_path(path).string());
  out << manifest.dump(2) << '\n';
  return info;
}

ToyModel load_weights(const std::filesystem::path& path, bool require_manifest) {
  const auto bytes = read_all(path);
  if (bytes.size() < kWeightHeaderBytes + kSpecBlockBytes ||
      !std::equal(std::begin(kWeightMagic), std::end(kWeightMagic), bytes.begin()))
    throw IoError(path.string() + ": not a pardec weight file");
  if (get_u32(&bytes[8]) != kWeightFormatVersion)
    throw IoError(path.string() + ": unsupported format version " + std::to_string(get_u32(&bytes[8])));
  if (get_u32(&bytes[12]) != kSpecBlockBytes) throw IoError(path.string() + ": bad spec block length");

  const unsigned char* p = &bytes[kWeightHeaderBytes];
  ModelSpec spec;
  spec.vocab_size = get_u64(p + 0);
  spec.d_model = get_u64(p + 8);
  spec.n_layers = get_u64(p + 16);
  spec.n_heads = get_u64(p + 24);
  spec.d_ff = get_u64(p + 32);
  spec.max_seq = get_u64(p + 40);
  spec.seed = get_u64(p + 48);
  const std::uint64_t init = get_u64(p + 56);
  if (init > 1) throw IoError(path.string() + ": bad init tag");
  spec.init = static_cast<WeightInit>(init);
  validate(spec);
  if (bytes.size() != weight_file_size(spec))
    throw IoError(path.string() + ": size " + std::to_string(bytes.size()) + " does not match spec (expected " +
                  std::to_string(weight_file_size(spec)) + ")");

  json manifest;
  if (require_manifest) {
    const auto mpath = manifest_path(path);
    std::ifstream in(mpath);
    if (!in) throw IoError("missing manifest " + mpath.string());
    try {
      manifest = json::parse(in);
    } catch (const json::exception& e) {
      throw IoError(mpath.string() + ": " + e.what());
    }
    if (manifest.value("file_checksum", "") != hex64(fnv1a_bytes(bytes.data(), bytes.size())))
      throw IoError(path.string() + ": checksum does not match manifest (file corrupted?)");
    if (manifest.value("spec", json{}) != spec_json(spec))
      throw IoError(path.string() + ": spec does not match manifest");
    if (!manifest.contains("tensors") || !manifest["tensors"].is_array())
      throw IoError(mpath.string() + ": missing tensor table");
  }

  ToyModel model(spec);
  std::size_t offset = kWeightHeaderBytes + kSpecBlockBytes;
  std::size_t index = 0;
  model.for_each_tensor([&](std::string_view name, std::uint64_t, auto& t) {
    const std::size_t n = static_cast<std::size_t>(t.size()) * sizeof(float);
    if (require_manifest) {
      const auto& entries = manifest.at("tensors");
      if (index >= entries.size() || entries[index].value("checksum", "") != hex64(fnv1a_bytes(&bytes[offset], n)))
        throw IoError(path.string() + ": tensor " + std::string(name) + " checksum mismatch");
    }
    std::memcpy(t.data(), &bytes[offset], n);
    offset += n;
    ++index;
  });
  return model;
}

}  // namespace pardec
