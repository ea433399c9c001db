#include "mir3/checkpoint.hpp"

#include <openssl/sha.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mir3 {

namespace {

constexpr char kMagic[8] = {'M', 'I', 'R', '3', 'C', 'K', 'P', 'T'};
constexpr std::uint16_t kFormatVersion = 1;

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(byte(0) | (byte(1) << 8));
    pos_ += 2;
    return v;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte(i)) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  // Peeks whether the remainder can hold a full entry (header + name + length
  // + values). Anything shorter is the trailing partition-flag block.
  bool looks_like_entry() const {
    if (remaining() < 2 + 4) return false;
    const auto name_len = static_cast<std::size_t>(byte(0) | (byte(1) << 8));
    if (remaining() < 2 + name_len + 4) return false;
    std::uint32_t values = 0;
    for (int i = 0; i < 4; ++i)
      v_or(values, static_cast<std::uint32_t>(byte(2 + name_len + static_cast<std::size_t>(i)))
                       << (8 * i));
    return remaining() >= 2 + name_len + 4 + 4ull * values;
  }

 private:
  static void v_or(std::uint32_t& acc, std::uint32_t v) { acc |= v; }

  std::uint8_t byte(std::size_t offset) const {
    return static_cast<std::uint8_t>(bytes_[pos_ + offset]);
  }

  void need(std::size_t n) const {
    if (remaining() < n)
      throw std::runtime_error("checkpoint: truncated file " + path_.string());
  }

  const std::string& bytes_;
  std::filesystem::path path_;
  std::size_t pos_ = 0;
};

}  // namespace

const Vector& CheckpointData::at(const std::string& name) const {
  for (const auto& [n, v] : entries)
    if (n == name) return v;
  throw std::runtime_error("checkpoint: no entry '" + name + "'");
}

bool CheckpointData::contains(const std::string& name) const {
  for (const auto& [n, v] : entries)
    if (n == name) return true;
  return false;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put_u16(buf, kFormatVersion);
  for (const auto& [name, values] : data.entries) {
    if (name.size() > 0xffff) throw std::invalid_argument("checkpoint: entry name too long");
    put_u16(buf, static_cast<std::uint16_t>(name.size()));
    buf.append(name);
    put_u32(buf, static_cast<std::uint32_t>(values.size()));
    for (Index i = 0; i < values.size(); ++i) put_f32(buf, static_cast<float>(values[i]));
  }
  for (const auto flag : data.trailing) buf.push_back(static_cast<char>(flag));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("checkpoint: short write to " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader r(bytes, path);
  if (r.str(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  const auto version = r.u16();
  if (version != kFormatVersion)
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));

  CheckpointData data;
  while (r.remaining() > 0 && r.looks_like_entry()) {
    const auto name_len = r.u16();
    std::string name = r.str(name_len);
    const auto count = r.u32();
    Vector values(static_cast<Index>(count));
    for (std::uint32_t i = 0; i < count; ++i)
      values[static_cast<Index>(i)] = static_cast<Scalar>(r.f32());
    data.entries.emplace_back(std::move(name), std::move(values));
  }
  while (r.remaining() > 0) data.trailing.push_back(static_cast<std::uint8_t>(r.str(1)[0]));
  return data;
}

void collect_params(const ParamStore& store, const std::string& prefix, CheckpointData& out) {
  for (const auto& [name, entry] : store) out.entries.emplace_back(prefix + name, entry.values);
}

void restore_params(const CheckpointData& data, const std::string& prefix, ParamStore& store) {
  for (auto& [name, entry] : store) {
    const Vector& loaded = data.at(prefix + name);
    if (loaded.size() != entry.values.size())
      throw std::runtime_error("checkpoint: size mismatch for '" + prefix + name + "'");
    entry.values = loaded;
  }
}

std::string sha256_bytes(const void* data, std::size_t size) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(static_cast<const unsigned char*>(data), size, digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (const unsigned char b : digest) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("sha256: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_bytes(bytes.data(), bytes.size());
}

}  // namespace mir3
