#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace tadt::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> data;
};

/// Tensors in file order plus free-form metadata stored under "__metadata__".
struct CheckpointData {
  std::vector<NamedTensor> tensors;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  const NamedTensor* find(const std::string& name) const;
};

/// Layout: "TADT" | u32 LE version | u64 LE header length | JSON header |
/// little-endian f32 payloads in header order. The header maps each tensor
/// name to {"shape", "dtype": "F32", "offset"} with offsets relative to the
/// start of the payload.
std::string encode_checkpoint(const CheckpointData& data);
CheckpointData decode_checkpoint(const std::string& bytes);

void save_checkpoint_file(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData load_checkpoint_file(const std::filesystem::path& path);

}  // namespace tadt::nn
