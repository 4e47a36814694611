#pragma once

#include <string>
#include <vector>

namespace wdiff::cli {

struct SelftestRow {
  std::string group;
  bool passed = false;
  std::string detail;
};

// Quick invariant battery; a few seconds on one core.
std::vector<SelftestRow> run_selftest();

}  // namespace wdiff::cli
