#include "divsample/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace divsample {

namespace fs = std::filesystem;

namespace {

std::uint64_t to_le(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((bits >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return out;
  }
  return bits;
}

fs::path with_suffix(const fs::path& stem, const char* suffix) {
  return fs::path(stem.string() + suffix);
}

}  // namespace

void write_f64_le(std::ostream& os, const double* values, std::size_t n) {
  std::vector<char> buf(n * 8);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(buf.data() + i * 8, &bits, 8);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void read_f64_le(std::istream& is, double* values, std::size_t n) {
  std::vector<char> buf(n * 8);
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) {
    throw std::runtime_error("read_f64_le: blob truncated");
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, buf.data() + i * 8, 8);
    values[i] = std::bit_cast<double>(to_le(bits));
  }
}

const CheckpointEntry& Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
}

bool checkpoint_exists(const fs::path& stem) {
  return fs::exists(with_suffix(stem, ".json")) && fs::exists(with_suffix(stem, ".f64"));
}

void save_checkpoint(const fs::path& stem, const Checkpoint& ckpt) {
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  const auto blob_path = with_suffix(stem, ".f64");
  nlohmann::json manifest;
  manifest["format"] = "divsample-checkpoint-v1";
  manifest["blob"] = blob_path.filename().string();
  manifest["meta"] = ckpt.meta;
  manifest["tensors"] = nlohmann::json::array();

  std::ofstream blob(blob_path, std::ios::binary | std::ios::trunc);
  if (!blob) throw std::runtime_error("checkpoint: cannot write " + blob_path.string());
  std::uint64_t offset = 0;
  for (const auto& e : ckpt.entries) {
    if (shape_numel(e.shape) != e.values.size()) {
      throw ShapeError("checkpoint: entry '" + e.name + "' shape " + shape_str(e.shape) + " has " +
                       std::to_string(e.values.size()) + " values");
    }
    manifest["tensors"].push_back({{"name", e.name}, {"shape", e.shape}, {"offset", offset}});
    write_f64_le(blob, e.values.data(), e.values.size());
    offset += 8 * e.values.size();
  }
  if (!blob) throw std::runtime_error("checkpoint: write failed for " + blob_path.string());

  std::ofstream js(with_suffix(stem, ".json"), std::ios::trunc);
  if (!js) throw std::runtime_error("checkpoint: cannot write manifest for " + stem.string());
  js << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const fs::path& stem) {
  const auto manifest_path = with_suffix(stem, ".json");
  std::ifstream js(manifest_path);
  if (!js) throw std::runtime_error("checkpoint: cannot open " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint: corrupt manifest " + manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "divsample-checkpoint-v1") {
    throw std::runtime_error("checkpoint: unrecognized format in " + manifest_path.string());
  }
  const auto blob_path = manifest_path.parent_path() / manifest.at("blob").get<std::string>();
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw std::runtime_error("checkpoint: cannot open " + blob_path.string());
  const auto blob_size = fs::file_size(blob_path);

  Checkpoint ckpt;
  ckpt.meta = manifest.value("meta", nlohmann::json::object());
  for (const auto& t : manifest.at("tensors")) {
    CheckpointEntry e;
    e.name = t.at("name").get<std::string>();
    e.shape = t.at("shape").get<Shape>();
    const auto offset = t.at("offset").get<std::uint64_t>();
    e.values.resize(shape_numel(e.shape));
    if (offset + 8 * e.values.size() > blob_size) {
      throw std::runtime_error("checkpoint: tensor '" + e.name + "' extends past end of blob");
    }
    blob.seekg(static_cast<std::streamoff>(offset));
    read_f64_le(blob, e.values.data(), e.values.size());
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

}  // namespace divsample
