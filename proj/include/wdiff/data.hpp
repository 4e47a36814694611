#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

#include "wdiff/array3.hpp"

namespace wdiff {

struct CsvTable {
  std::vector<std::string> columns;
  RowMatrix<double> values;  // rows x columns
};

// First row is a header; every following non-blank row must hold one numeric
// cell per column. Trailing blank lines are ignored.
CsvTable parse_csv(std::string_view text, const std::string& source = "<memory>");
CsvTable load_csv(const std::string& path);

// N = floor((T_total - length) / stride) + 1 windows; window i starts at i * stride.
TimeSeriesBatch sliding_windows(const RowMatrix<double>& series, Eigen::Index length, Eigen::Index stride = 1);

enum class Normalization { minmax, zscore, none };
Normalization parse_normalization(const std::string& s);
std::string to_string(Normalization n);

// Per-feature affine map: x = offset + scale * y. A constant feature gets
// scale 0, so it normalizes to 0.5 (minmax) or 0 (zscore) and inverts to the
// constant.
struct NormalizationRecord {
  Normalization mode = Normalization::none;
  Eigen::VectorXd offset;
  Eigen::VectorXd scale;
};

struct Normalized {
  TimeSeriesBatch batch;
  NormalizationRecord record;
};

Normalized normalize(const TimeSeriesBatch& batch, Normalization mode);
TimeSeriesBatch apply_normalization(const TimeSeriesBatch& batch, const NormalizationRecord& record);
TimeSeriesBatch denormalize(const TimeSeriesBatch& batch, const NormalizationRecord& record);

// Export layout: header "sample,feature_0,...", one row per (sample, time).
std::string batch_to_csv(const TimeSeriesBatch& batch, const std::vector<std::string>& feature_names = {});
// Inverse of batch_to_csv; all samples must have the same length.
TimeSeriesBatch batch_from_table(const CsvTable& table, const std::string& source = "<memory>");

// A file with a leading "sample" column is read as a batch; anything else is
// a raw series cut into windows of `window` with `stride`.
TimeSeriesBatch load_dataset(const std::string& path, Eigen::Index window, Eigen::Index stride = 1);

std::string read_file(const std::string& path);
// Writes to a temporary sibling, then renames over `path`.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace wdiff
