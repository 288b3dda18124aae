#include "lingo/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lingo/errors.hpp"

namespace lingo {

namespace {

constexpr char kMagic[4] = {'L', 'G', 'C', 'K'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(p[i]) << (8 * i);
  return value;
}

}  // namespace

const Blob& CheckpointContents::blob(const std::string& name) const {
  for (const Blob& b : blobs) {
    if (b.name == name) return b;
  }
  throw CheckpointError("checkpoint has no tensor named '" + name + "'");
}

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size, std::uint64_t hash) {
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= data[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointContents& contents) {
  nlohmann::json manifest;
  manifest["meta"] = contents.meta;
  manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const Blob& b : contents.blobs) {
    if (ad::shape_size(b.shape) != b.values.size()) {
      throw CheckpointError("tensor '" + b.name + "' size does not match its shape");
    }
    manifest["tensors"].push_back(
        {{"name", b.name}, {"shape", b.shape}, {"offset", offset}, {"count", b.values.size()}});
    offset += b.values.size() * sizeof(double);
  }
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> bytes(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(bytes, kCheckpointVersion);
  put_le<std::uint64_t>(bytes, text.size());
  bytes.insert(bytes.end(), text.begin(), text.end());
  bytes.reserve(bytes.size() + offset + 8);
  for (const Blob& b : contents.blobs) {
    for (double v : b.values) put_le<std::uint64_t>(bytes, std::bit_cast<std::uint64_t>(v));
  }
  put_le<std::uint64_t>(bytes, fnv1a64(bytes.data(), bytes.size()));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointContents read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  constexpr std::size_t kHeader = 4 + 4 + 8;
  if (bytes.size() < kHeader + 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(path.string() + ": not a checkpoint file");
  }
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": format version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) +
                          ")");
  }
  const std::size_t body = bytes.size() - 8;
  if (fnv1a64(bytes.data(), body) != get_le<std::uint64_t>(bytes.data() + body)) {
    throw CheckpointError(path.string() + ": checksum mismatch (truncated or corrupted file)");
  }
  const auto manifest_size = get_le<std::uint64_t>(bytes.data() + 8);
  if (manifest_size > body - kHeader) throw CheckpointError(path.string() + ": bad manifest size");

  CheckpointContents out;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + kHeader,
                                     bytes.begin() + static_cast<std::ptrdiff_t>(kHeader + manifest_size));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": unreadable manifest: " + e.what());
  }
  out.meta = manifest.at("meta");
  const std::size_t data_start = kHeader + manifest_size;
  for (const auto& t : manifest.at("tensors")) {
    Blob b;
    b.name = t.at("name").get<std::string>();
    b.shape = t.at("shape").get<ad::Shape>();
    const auto offset = t.at("offset").get<std::uint64_t>();
    const auto count = t.at("count").get<std::uint64_t>();
    if (data_start + offset + count * sizeof(double) > body) {
      throw CheckpointError(path.string() + ": tensor '" + b.name + "' runs past the end");
    }
    b.values.resize(count);
    const std::uint8_t* p = bytes.data() + data_start + offset;
    for (std::size_t i = 0; i < count; ++i) {
      b.values[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
    }
    out.blobs.push_back(std::move(b));
  }
  return out;
}

}  // namespace lingo
