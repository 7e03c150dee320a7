#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsk/numerics.hpp"

namespace dpsk {

/// csv: comma separated, no header, one matrix row per line.
/// dpbin: "DPMT", u16 version, u32 rows, u32 cols, row-major little-endian f64.
enum class MatrixFormat : std::uint8_t { csv, dpbin };

/// Throws UsageError for anything but "csv" or "dpbin".
MatrixFormat parse_format(std::string_view name);
std::string_view format_name(MatrixFormat format);

struct MatrixShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// One-pass row iterator. Only the current row is held in memory. Malformed
/// input (ragged rows, non-finite or unparsable entries, truncated binary)
/// raises FormatError naming the line or byte offset.
class RowReader {
 public:
  RowReader(const std::filesystem::path& path, MatrixFormat format);

  /// Column count; known after the header (dpbin) or the first row (csv).
  std::size_t cols() const noexcept { return cols_; }
  /// Rows delivered so far.
  std::size_t rows_read() const noexcept { return rows_read_; }

  /// Fills row with the next matrix row; false at end of input.
  bool next(std::vector<double>& row);

 private:
  bool next_csv(std::vector<double>& row);
  bool next_binary(std::vector<double>& row);

  std::filesystem::path path_;
  MatrixFormat format_;
  std::ifstream in_;
  std::size_t cols_ = 0;
  std::size_t rows_read_ = 0;
  std::size_t declared_rows_ = 0;
  std::size_t line_ = 0;
  std::string pending_;
  bool has_pending_ = false;
};

/// Full validating pass that keeps only the shape.
MatrixShape scan_shape(const std::filesystem::path& path, MatrixFormat format);

DenseMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format);
void save_matrix(const std::filesystem::path& path, const DenseMatrix& m, MatrixFormat format);

/// Parses one CSV line; line_no is only used in error messages.
std::vector<double> parse_csv_row(std::string_view line, std::size_t line_no);
/// Shortest round-trip decimal form of every entry.
std::string format_csv(const DenseMatrix& m);

std::vector<std::uint8_t> encode_dpmt(const DenseMatrix& m);
DenseMatrix decode_dpmt(std::span<const std::uint8_t> bytes);

}  // namespace dpsk
