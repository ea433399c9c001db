#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace mir3 {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Defender/adversary role assignment, one flag per agent (1 = adversary).
struct Partition {
  std::vector<std::uint8_t> flags;

  Partition() = default;
  explicit Partition(int n) : flags(static_cast<std::size_t>(n), 0) {}

  int size() const { return static_cast<int>(flags.size()); }
  bool is_adversary(int agent) const { return flags[static_cast<std::size_t>(agent)] != 0; }
  void set(int agent, bool adversary) { flags[static_cast<std::size_t>(agent)] = adversary ? 1 : 0; }

  int adversary_count() const {
    int n = 0;
    for (auto f : flags) n += (f != 0);
    return n;
  }
  bool none() const { return adversary_count() == 0; }

  std::string bitstring() const {
    std::string s;
    s.reserve(flags.size());
    for (auto f : flags) s.push_back(f ? '1' : '0');
    return s;
  }

  static Partition from_bitstring(const std::string& bits);

  bool operator==(const Partition&) const = default;
};

}  // namespace mir3
