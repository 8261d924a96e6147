#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "divsample/tensor.hpp"

namespace divsample {

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

// On disk: `<stem>.json` holds {"format", "blob", "meta", "tensors": [{name,
// shape, offset}]} with byte offsets into `<stem>.f64`, a little-endian
// float64 blob written in manifest order.
struct Checkpoint {
  std::vector<CheckpointEntry> entries;
  nlohmann::json meta = nlohmann::json::object();

  const CheckpointEntry& find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& stem, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& stem);
bool checkpoint_exists(const std::filesystem::path& stem);

// Raw little-endian float64 helpers shared with dataset persistence.
void write_f64_le(std::ostream& os, const double* values, std::size_t n);
void read_f64_le(std::istream& is, double* values, std::size_t n);

}  // namespace divsample
