#include "wdiff/data.hpp"

#include <unistd.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wdiff/error.hpp"

namespace wdiff {

using Eigen::Index;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

CsvTable parse_csv(std::string_view text, const std::string& source) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    lines.push_back(text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::EmptyData, source + ": no header row");

  CsvTable table;
  for (const auto cell : split_cells(lines[0])) table.columns.emplace_back(cell);
  const Index cols = static_cast<Index>(table.columns.size());
  const Index rows = static_cast<Index>(lines.size()) - 1;
  if (rows == 0) throw Error(ErrorCode::EmptyData, source + ": header only, no data rows");

  table.values.resize(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto cells = split_cells(lines[r + 1]);
    const std::string where = source + ": row " + std::to_string(r + 2);
    if (static_cast<Index>(cells.size()) != cols) {
      throw Error(ErrorCode::ParseError, where + ": expected " + std::to_string(cols) + " cells, found " +
                                             std::to_string(cells.size()));
    }
    for (Index c = 0; c < cols; ++c) {
      double v;
      if (!parse_double(cells[c], v)) {
        throw Error(ErrorCode::NonNumericCell, where + ", column " + std::to_string(c + 1) + " ('" +
                                                   table.columns[c] + "'): '" + std::string(cells[c]) +
                                                   "' is not numeric");
      }
      table.values(r, c) = v;
    }
  }
  return table;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CsvTable load_csv(const std::string& path) { return parse_csv(read_file(path), path); }

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorCode::IoError, "cannot move output into '" + path + "': " + ec.message());
  }
}

TimeSeriesBatch sliding_windows(const RowMatrix<double>& series, Index length, Index stride) {
  if (length < 1 || stride < 1) throw Error(ErrorCode::WindowTooLong, "window length and stride must be positive");
  const Index total = series.rows();
  if (length > total) {
    throw Error(ErrorCode::WindowTooLong, "window length " + std::to_string(length) + " exceeds series length " +
                                              std::to_string(total));
  }
  const Index n = (total - length) / stride + 1;
  const Index d = series.cols();
  TimeSeriesBatch batch(n, length, d);
  for (Index i = 0; i < n; ++i) batch.sample(i) = series.middleRows(i * stride, length);
  return batch;
}

Normalization parse_normalization(const std::string& s) {
  if (s == "minmax") return Normalization::minmax;
  if (s == "zscore") return Normalization::zscore;
  if (s == "none") return Normalization::none;
  throw Error(ErrorCode::InvalidConfig, "unknown normalization '" + s + "'");
}

std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::minmax: return "minmax";
    case Normalization::zscore: return "zscore";
    case Normalization::none: break;
  }
  return "none";
}

Normalized normalize(const TimeSeriesBatch& batch, Normalization mode) {
  if (!batch.all_finite()) throw Error(ErrorCode::ParseError, "normalize: non-finite values");
  const Index d = batch.features();
  NormalizationRecord rec;
  rec.mode = mode;
  rec.offset = Eigen::VectorXd::Zero(d);
  rec.scale = Eigen::VectorXd::Ones(d);
  const auto rows = batch.rows();
  for (Index k = 0; k < d && rows.rows() > 0; ++k) {
    const auto col = rows.col(k);
    if (mode == Normalization::minmax) {
      rec.offset[k] = col.minCoeff();
      rec.scale[k] = col.maxCoeff() - rec.offset[k];
    } else if (mode == Normalization::zscore) {
      rec.offset[k] = col.mean();
      rec.scale[k] = std::sqrt((col.array() - rec.offset[k]).square().mean());
    }
  }
  return {apply_normalization(batch, rec), rec};
}

TimeSeriesBatch apply_normalization(const TimeSeriesBatch& batch, const NormalizationRecord& rec) {
  TimeSeriesBatch out = batch;
  if (rec.mode == Normalization::none) return out;
  if (rec.offset.size() != batch.features()) throw Error(ErrorCode::ShapeMismatch, "normalization feature count");
  const double degenerate = rec.mode == Normalization::minmax ? 0.5 : 0.0;
  auto rows = out.rows();
  for (Index k = 0; k < batch.features(); ++k) {
    if (rec.scale[k] == 0.0) {
      rows.col(k).setConstant(degenerate);
    } else {
      rows.col(k).array() = (rows.col(k).array() - rec.offset[k]) / rec.scale[k];
    }
  }
  return out;
}

TimeSeriesBatch denormalize(const TimeSeriesBatch& batch, const NormalizationRecord& rec) {
  TimeSeriesBatch out = batch;
  if (rec.mode == Normalization::none) return out;
  if (rec.offset.size() != batch.features()) throw Error(ErrorCode::ShapeMismatch, "normalization feature count");
  auto rows = out.rows();
  for (Index k = 0; k < batch.features(); ++k) rows.col(k).array() = rows.col(k).array() * rec.scale[k] + rec.offset[k];
  return out;
}

std::string batch_to_csv(const TimeSeriesBatch& batch, const std::vector<std::string>& feature_names) {
  std::string out = "sample";
  for (Index k = 0; k < batch.features(); ++k) {
    out += ',';
    out += static_cast<std::size_t>(k) < feature_names.size() ? feature_names[k] : "feature_" + std::to_string(k);
  }
  out += '\n';
  char buf[32];
  for (Index n = 0; n < batch.samples(); ++n) {
    for (Index t = 0; t < batch.length(); ++t) {
      out += std::to_string(n);
      for (Index k = 0; k < batch.features(); ++k) {
        std::snprintf(buf, sizeof buf, ",%.17g", batch(n, t, k));
        out += buf;
      }
      out += '\n';
    }
  }
  return out;
}

TimeSeriesBatch batch_from_table(const CsvTable& table, const std::string& source) {
  if (table.columns.empty() || table.columns[0] != "sample") {
    throw Error(ErrorCode::ParseError, source + ": batch files start with a 'sample' column");
  }
  const Index rows = table.values.rows();
  const Index d = table.values.cols() - 1;
  if (d < 1) throw Error(ErrorCode::EmptyData, source + ": no feature columns");
  // Samples must appear as consecutive runs labelled 0, 1, 2, ...
  std::vector<Index> starts;
  for (Index r = 0; r < rows; ++r) {
    const double id = table.values(r, 0);
    if (r == 0 || id != table.values(r - 1, 0)) {
      if (id != static_cast<double>(starts.size())) {
        throw Error(ErrorCode::ParseError, source + ": row " + std::to_string(r + 2) + ": expected sample " +
                                               std::to_string(starts.size()));
      }
      starts.push_back(r);
    }
  }
  const Index n = static_cast<Index>(starts.size());
  const Index len = rows / n;
  if (len * n != rows) throw Error(ErrorCode::ParseError, source + ": samples have different lengths");
  TimeSeriesBatch batch(n, len, d);
  for (Index i = 0; i < n; ++i) {
    if (starts[i] != i * len) throw Error(ErrorCode::ParseError, source + ": samples have different lengths");
    batch.sample(i) = table.values.block(i * len, 1, len, d);
  }
  return batch;
}

TimeSeriesBatch load_dataset(const std::string& path, Index window, Index stride) {
  const CsvTable table = load_csv(path);
  if (!table.columns.empty() && table.columns[0] == "sample") return batch_from_table(table, path);
  return sliding_windows(table.values, window, stride);
}

}  // namespace wdiff
