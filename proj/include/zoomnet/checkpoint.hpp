#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomnet/tensor.hpp"

namespace zoomnet {

inline constexpr const char* kCheckpointFormat = "zoomnet-ckpt/1";

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

struct Checkpoint {
  nlohmann::json meta;
  std::vector<NamedTensor> tensors;
};

/// Writes a single-line JSON header (format, meta, per-tensor name/shape/offset)
/// followed by the raw little-endian float32 payload. Offsets are bytes from
/// the start of the payload.
void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors,
                     const nlohmann::json& meta);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace zoomnet
