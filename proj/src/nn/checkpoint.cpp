#include "tadt/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tadt/error.hpp"

namespace tadt::nn {

namespace {

constexpr char kMagic[4] = {'T', 'A', 'D', 'T'};

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const std::string& in, std::size_t pos) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    value |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return value;
}

std::uint64_t element_count(const std::vector<std::uint64_t>& shape) {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

const NamedTensor* CheckpointData::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::string encode_checkpoint(const CheckpointData& data) {
  nlohmann::ordered_json header = nlohmann::ordered_json::object();
  header["__metadata__"] = data.metadata;
  std::uint64_t offset = 0;
  for (const auto& t : data.tensors) {
    require(t.name != "__metadata__", ErrorKind::Checkpoint, "reserved tensor name");
    require(element_count(t.shape) == t.data.size(), ErrorKind::Checkpoint,
            "tensor '" + t.name + "' shape does not match its data length");
    require(!header.contains(t.name), ErrorKind::Checkpoint, "duplicate tensor name '" + t.name + "'");
    header[t.name] = {{"shape", t.shape}, {"dtype", "F32"}, {"offset", offset}};
    offset += 4 * t.data.size();
  }
  const std::string text = header.dump();
  std::string out(kMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& t : data.tensors)
    for (float f : t.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

CheckpointData decode_checkpoint(const std::string& bytes) {
  require(bytes.size() >= 16, ErrorKind::Checkpoint, "file too short for a checkpoint header");
  require(std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorKind::Checkpoint, "bad magic bytes");
  const auto version = get_le<std::uint32_t>(bytes, 4);
  require(version == kCheckpointVersion, ErrorKind::Checkpoint,
          "unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(bytes, 8);
  require(header_len <= bytes.size() - 16, ErrorKind::Checkpoint, "truncated header");

  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Checkpoint, std::string("corrupt header: ") + e.what());
  }
  require(header.is_object(), ErrorKind::Checkpoint, "header is not a JSON object");

  const std::size_t payload_start = 16 + header_len;
  const std::uint64_t payload_len = bytes.size() - payload_start;
  CheckpointData data;
  std::uint64_t expected_offset = 0;
  try {
    for (const auto& [name, entry] : header.items()) {
      if (name == "__metadata__") {
        data.metadata = entry;
        continue;
      }
      require(entry.value("dtype", "") == "F32", ErrorKind::Checkpoint, "tensor '" + name + "' has unsupported dtype");
      NamedTensor t;
      t.name = name;
      t.shape = entry.at("shape").get<std::vector<std::uint64_t>>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      require(offset == expected_offset, ErrorKind::Checkpoint, "tensor '" + name + "' offset out of order");
      const std::uint64_t n = element_count(t.shape);
      require(offset + 4 * n <= payload_len, ErrorKind::Checkpoint, "truncated payload for tensor '" + name + "'");
      t.data.resize(n);
      for (std::uint64_t i = 0; i < n; ++i)
        t.data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, payload_start + offset + 4 * i));
      expected_offset = offset + 4 * n;
      data.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Checkpoint, std::string("corrupt header: ") + e.what());
  }
  require(expected_offset == payload_len, ErrorKind::Checkpoint,
          "payload length " + std::to_string(payload_len) + " does not match declared shapes (" +
              std::to_string(expected_offset) + " bytes)");
  return data;
}

void save_checkpoint_file(const std::filesystem::path& path, const CheckpointData& data) {
  const std::string bytes = encode_checkpoint(data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Checkpoint, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorKind::Checkpoint, "failed writing '" + path.string() + "'");
}

CheckpointData load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Checkpoint, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace tadt::nn
