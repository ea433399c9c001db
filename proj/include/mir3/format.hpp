#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mir3/types.hpp"

namespace mir3 {

/// Shortest round-trip decimal representation.
std::string format_number(Scalar v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);

/// Runs fn(0..count-1) on up to `jobs` worker threads; rethrows the first
/// exception. Jobs must be independent.
void parallel_for(int jobs, int count, const std::function<void(int)>& fn);

}  // namespace mir3
