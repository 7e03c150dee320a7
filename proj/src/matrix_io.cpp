#include "dpsk/matrix_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>

#include "dpsk/errors.hpp"

namespace dpsk {
namespace {

constexpr char kMagic[4] = {'D', 'P', 'M', 'T'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 4;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<std::uint8_t>(value >> (8 * b)));
}

template <class T>
T get_le(const std::uint8_t* p) {
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) value |= static_cast<T>(static_cast<T>(p[b]) << (8 * b));
  return value;
}

MatrixShape parse_header(const std::uint8_t* p) {
  if (std::memcmp(p, kMagic, 4) != 0) throw FormatError("dpbin: bad magic at offset 0");
  const auto version = get_le<std::uint16_t>(p + 4);
  if (version != kVersion) throw FormatError("dpbin: unsupported version " + std::to_string(version) + " at offset 4");
  return {get_le<std::uint32_t>(p + 6), get_le<std::uint32_t>(p + 10)};
}

double checked_value(std::uint64_t bits, std::size_t offset) {
  const double v = std::bit_cast<double>(bits);
  if (!std::isfinite(v)) throw FormatError("dpbin: non-finite entry at offset " + std::to_string(offset));
  return v;
}

}  // namespace

MatrixFormat parse_format(std::string_view name) {
  if (name == "csv") return MatrixFormat::csv;
  if (name == "dpbin") return MatrixFormat::dpbin;
  throw UsageError("unknown matrix format '" + std::string(name) + "' (expected csv or dpbin)");
}

std::string_view format_name(MatrixFormat format) {
  return format == MatrixFormat::csv ? "csv" : "dpbin";
}

std::vector<double> parse_csv_row(std::string_view line, std::size_t line_no) {
  std::vector<double> row;
  const std::string where = "csv line " + std::to_string(line_no);
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const std::string_view field =
        trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (field.empty()) throw FormatError(where + ": empty field " + std::to_string(row.size() + 1));
    const char* first = field.data();
    const char* last = first + field.size();
    if (*first == '+') ++first;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc::result_out_of_range) {
      throw FormatError(where + ": value out of range '" + std::string(field) + "'");
    }
    if (ec != std::errc() || ptr != last) {
      throw FormatError(where + ": cannot parse '" + std::string(field) + "'");
    }
    if (!std::isfinite(v)) throw FormatError(where + ": non-finite entry '" + std::string(field) + "'");
    row.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return row;
}

std::string format_csv(const DenseMatrix& m) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out.push_back(',');
      const auto res = std::to_chars(buf, buf + sizeof(buf), m(i, j));
      out.append(buf, res.ptr);
    }
    out.push_back('\n');
  }
  return out;
}

std::vector<std::uint8_t> encode_dpmt(const DenseMatrix& m) {
  constexpr auto limit = std::numeric_limits<std::uint32_t>::max();
  if (m.rows() > limit || m.cols() > limit) throw ContractViolation("dpbin: matrix too large");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.reserve(kHeaderBytes + 8 * m.size());
  put_le(out, kVersion);
  put_le(out, static_cast<std::uint32_t>(m.rows()));
  put_le(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) put_le(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

DenseMatrix decode_dpmt(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw FormatError("dpbin: truncated header at offset " + std::to_string(bytes.size()));
  }
  const MatrixShape shape = parse_header(bytes.data());
  const std::size_t need = kHeaderBytes + 8 * shape.rows * shape.cols;
  if (bytes.size() < need) throw FormatError("dpbin: truncated data at offset " + std::to_string(bytes.size()));
  if (bytes.size() > need) throw FormatError("dpbin: trailing bytes at offset " + std::to_string(need));
  DenseMatrix m(shape.rows, shape.cols);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::size_t offset = kHeaderBytes + 8 * i;
    m.data()[i] = checked_value(get_le<std::uint64_t>(bytes.data() + offset), offset);
  }
  return m;
}

RowReader::RowReader(const std::filesystem::path& path, MatrixFormat format)
    : path_(path), format_(format), in_(path, std::ios::binary) {
  if (!in_) throw FormatError("cannot open '" + path.string() + "'");
  if (format_ == MatrixFormat::dpbin) {
    std::uint8_t header[kHeaderBytes];
    in_.read(reinterpret_cast<char*>(header), kHeaderBytes);
    if (static_cast<std::size_t>(in_.gcount()) != kHeaderBytes) {
      throw FormatError("dpbin: truncated header at offset " + std::to_string(in_.gcount()));
    }
    const MatrixShape shape = parse_header(header);
    declared_rows_ = shape.rows;
    cols_ = shape.cols;
    return;
  }
  // Peek the first non-blank row to learn the width.
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (trim(line).empty()) continue;
    pending_ = std::move(line);
    has_pending_ = true;
    cols_ = parse_csv_row(pending_, line_).size();
    return;
  }
  throw FormatError("csv: '" + path.string() + "' holds no rows");
}

bool RowReader::next(std::vector<double>& row) {
  const bool got = format_ == MatrixFormat::csv ? next_csv(row) : next_binary(row);
  if (got) ++rows_read_;
  return got;
}

bool RowReader::next_csv(std::vector<double>& row) {
  if (has_pending_) {
    has_pending_ = false;
    row = parse_csv_row(pending_, line_);
    return true;
  }
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (trim(line).empty()) continue;
    row = parse_csv_row(line, line_);
    if (row.size() != cols_) {
      throw FormatError("csv line " + std::to_string(line_) + ": ragged row with " +
                        std::to_string(row.size()) + " fields, expected " + std::to_string(cols_));
    }
    return true;
  }
  return false;
}

bool RowReader::next_binary(std::vector<double>& row) {
  const std::size_t offset = kHeaderBytes + 8 * cols_ * rows_read_;
  if (rows_read_ == declared_rows_) {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw FormatError("dpbin: trailing bytes at offset " + std::to_string(offset));
    }
    return false;
  }
  std::vector<std::uint8_t> buf(8 * cols_);
  in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in_.gcount()) != buf.size()) {
    throw FormatError("dpbin: truncated data at offset " + std::to_string(offset + static_cast<std::size_t>(in_.gcount())));
  }
  row.resize(cols_);
  for (std::size_t j = 0; j < cols_; ++j) row[j] = checked_value(get_le<std::uint64_t>(buf.data() + 8 * j), offset + 8 * j);
  return true;
}

MatrixShape scan_shape(const std::filesystem::path& path, MatrixFormat format) {
  RowReader reader(path, format);
  std::vector<double> row;
  while (reader.next(row)) {
  }
  return {reader.rows_read(), reader.cols()};
}

DenseMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format) {
  RowReader reader(path, format);
  std::vector<double> data, row;
  while (reader.next(row)) data.insert(data.end(), row.begin(), row.end());
  return DenseMatrix(reader.rows_read(), reader.cols(), std::move(data));
}

void save_matrix(const std::filesystem::path& path, const DenseMatrix& m, MatrixFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  if (format == MatrixFormat::csv) {
    const std::string text = format_csv(m);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
  } else {
    const auto bytes = encode_dpmt(m);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw FormatError("write to '" + path.string() + "' failed");
}

}  // namespace dpsk
