#include "wdiff/transform.hpp"

#include <algorithm>
#include <cmath>

namespace wdiff {

BoundaryMode parse_boundary_mode(const std::string& s) {
  if (s == "symmetric") return BoundaryMode::symmetric;
  if (s == "periodized" || s == "periodization") return BoundaryMode::periodized;
  throw Error(ErrorCode::InvalidConfig, "unknown boundary mode '" + s + "'");
}

std::string to_string(BoundaryMode mode) {
  return mode == BoundaryMode::symmetric ? "symmetric" : "periodized";
}

Eigen::Index coeff_len(Eigen::Index prev_len, Eigen::Index filter_len, BoundaryMode mode) {
  if (mode == BoundaryMode::symmetric) return (prev_len + filter_len - 1) / 2;
  return (prev_len + 1) / 2;
}

std::vector<Eigen::Index> level_lengths(Eigen::Index T, Eigen::Index filter_len, int levels, BoundaryMode mode) {
  std::vector<Eigen::Index> out;
  Eigen::Index len = T;
  for (int l = 0; l < levels; ++l) {
    len = coeff_len(len, filter_len, mode);
    out.push_back(len);
  }
  return out;
}

int level_count(Eigen::Index T, Eigen::Index filter_len) {
  const double ratio = static_cast<double>(T) / static_cast<double>(std::max<Eigen::Index>(filter_len - 1, 1));
  int levels = std::max(3, std::min(7, static_cast<int>(std::floor(std::log2(ratio)))));
  while (levels > 1 && level_lengths(T, filter_len, levels, BoundaryMode::symmetric).back() < 2) --levels;
  return levels;
}

FilterBank default_filter_bank(WaveletFamily family, Eigen::Index T) {
  const bool long_series = T >= 64;
  switch (family) {
    case WaveletFamily::db: return make_filter_bank(family, long_series ? 4 : 2);
    case WaveletFamily::sym: return make_filter_bank(family, long_series ? 4 : 2);
    case WaveletFamily::coif: return make_filter_bank(family, long_series ? 2 : 1);
    case WaveletFamily::bior:
    case WaveletFamily::rbio: return make_filter_bank(family, 2, 2);
  }
  return make_filter_bank(WaveletFamily::db, 2);
}

FilterBank WaveletConfig::bank(Eigen::Index T) const {
  static const std::pair<const char*, WaveletFamily> families[] = {{"db", WaveletFamily::db},
                                                                   {"sym", WaveletFamily::sym},
                                                                   {"coif", WaveletFamily::coif},
                                                                   {"bior", WaveletFamily::bior},
                                                                   {"rbio", WaveletFamily::rbio}};
  for (const auto& [prefix, family] : families) {
    if (name == prefix) return default_filter_bank(family, T);
  }
  return make_filter_bank(name);
}

int WaveletConfig::resolve_levels(Eigen::Index T) const {
  return levels > 0 ? levels : level_count(T, bank(T).length());
}

}  // namespace wdiff
