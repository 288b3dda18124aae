#pragma once

// Single-file checkpoints: a magic tag and format version, a JSON manifest
// (tensor names, shapes, byte offsets and free-form metadata), the tensor
// data as little-endian float64, and a trailing FNV-1a checksum.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lingo/autodiff.hpp"

namespace lingo {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Blob {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;
  bool operator==(const Blob&) const = default;
};

struct CheckpointContents {
  nlohmann::json meta;
  std::vector<Blob> blobs;

  // Throws CheckpointError when the name is missing.
  const Blob& blob(const std::string& name) const;
};

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size,
                      std::uint64_t hash = 0xcbf29ce484222325ULL);

// Writes to a temporary sibling and renames, so an interrupted write never
// replaces the previous file.
void write_checkpoint(const std::filesystem::path& path, const CheckpointContents& contents);
CheckpointContents read_checkpoint(const std::filesystem::path& path);

}  // namespace lingo
