#include "zoomnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace zoomnet {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void write_le(std::ostream& os, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * 4));
  } else {
    for (float v : values) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      char b[4] = {char(bits), char(bits >> 8), char(bits >> 16), char(bits >> 24)};
      os.write(b, 4);
    }
  }
}

std::vector<float> read_le(const char* data, std::size_t count) {
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto* b = reinterpret_cast<const unsigned char*>(data + 4 * i);
    std::uint32_t bits = std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
                         std::uint32_t(b[3]) << 24;
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors,
                     const nlohmann::json& meta) {
  nlohmann::json header;
  header["format"] = kCheckpointFormat;
  header["meta"] = meta;
  auto& entries = header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : tensors) {
    entries.push_back({{"name", t.name}, {"shape", t.tensor.shape()}, {"offset", offset}});
    offset += t.tensor.numel() * 4;
  }
  header["payload_bytes"] = offset;

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os << header.dump() << '\n';
  for (const auto& t : tensors) write_le(os, t.tensor.values());
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ParseError("checkpoint " + path.string() + ": missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path.string() + ": bad header: " + e.what());
  }
  if (header.value("format", std::string{}) != kCheckpointFormat) {
    throw ParseError("checkpoint " + path.string() + ": unsupported format '" +
                     header.value("format", std::string{}) + "'");
  }
  const std::size_t payload = header.at("payload_bytes").get<std::size_t>();
  std::string data(payload, '\0');
  is.read(data.data(), static_cast<std::streamsize>(payload));
  if (static_cast<std::size_t>(is.gcount()) != payload) {
    throw ParseError("checkpoint " + path.string() + ": truncated payload");
  }

  Checkpoint ckpt;
  ckpt.meta = header.value("meta", nlohmann::json::object());
  for (const auto& e : header.at("tensors")) {
    Shape shape = e.at("shape").get<Shape>();
    const std::size_t offset = e.at("offset").get<std::size_t>();
    const std::size_t count = shape_numel(shape);
    if (offset + count * 4 > payload) {
      throw ParseError("checkpoint " + path.string() + ": tensor '" + e.at("name").get<std::string>() +
                       "' exceeds payload");
    }
    ckpt.tensors.push_back({e.at("name").get<std::string>(),
                            Tensor<float>(std::move(shape), read_le(data.data() + offset, count))});
  }
  return ckpt;
}

}  // namespace zoomnet
