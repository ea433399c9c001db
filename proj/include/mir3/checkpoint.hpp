#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mir3/net.hpp"
#include "mir3/types.hpp"

namespace mir3 {

/// Checkpoint wire format:
///   magic "MIR3CKPT", format version u16 (little endian), then per entry:
///   name length u16, name bytes, array length u32, little-endian f32 values.
/// Adversary checkpoints append one flag byte per agent after the entries.
/// Optimizer state is never written; values widen f32 -> f64 on load.
struct CheckpointData {
  std::vector<std::pair<std::string, Vector>> entries;
  std::vector<std::uint8_t> trailing;  // partition flags, empty for defenders

  const Vector& at(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::filesystem::path& path);

/// Appends every entry of `store` as ("<prefix><name>", values).
void collect_params(const ParamStore& store, const std::string& prefix, CheckpointData& out);

/// Writes checkpoint values back into `store` by name; throws if any entry
/// under the prefix is missing or sized differently.
void restore_params(const CheckpointData& data, const std::string& prefix, ParamStore& store);

/// SHA-256 of a file's bytes, lowercase hex. Used for the defender-freeze
/// invariant and content-addressed run directories.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(const void* data, std::size_t size);

}  // namespace mir3
