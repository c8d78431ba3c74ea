#pragma once

// On-disk checkpoint layout:
//   "SYNTHQCK"  8 bytes
//   version     uint32 little-endian
//   header_len  uint64 little-endian
//   header      JSON (config, hashes, counters, logs, array lengths)
//   arrays      float64 little-endian, in the order listed in the header
// The header records the SHA-256 of the array bytes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace synthq::detail {

struct CheckpointData {
  nlohmann::json header;  // everything except the arrays
  std::vector<double> projection;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::vector<double> best_projection;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace synthq::detail
