#include "dpsk/sketch.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "byte_io.hpp"
#include "dpsk/errors.hpp"

namespace dpsk {
namespace {

constexpr char kMagic[4] = {'D', 'P', 'S', 'K'};
constexpr std::uint16_t kFormatVersion = 1;
constexpr std::size_t kMomentSampleCap = std::size_t{1} << 20;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::size_t checked_product(std::size_t a, std::size_t b, const char* what) {
  std::size_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw CapacityError(std::string(what) + ": " + std::to_string(a) + " x " +
                        std::to_string(b) + " entries overflow");
  }
  return out;
}

}  // namespace

double generate_normal(std::uint64_t seed, std::uint64_t index) noexcept {
  const std::uint64_t key = splitmix64(seed);
  const std::uint64_t a = splitmix64(key ^ splitmix64(2 * index));
  const std::uint64_t b = splitmix64(key ^ splitmix64(2 * index + 1));
  // u1 in (0, 1] keeps the log finite; u2 in [0, 1).
  const double u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t sketcher_fingerprint(std::uint64_t seed, std::uint64_t r,
                                   std::uint64_t m) noexcept {
  std::uint64_t h = splitmix64(seed ^ 0x4450534B00000000ull);
  h = splitmix64(h ^ r);
  h = splitmix64(h ^ (m * 0x9E3779B97F4A7C15ull));
  return splitmix64(h ^ kGeneratorVersion);
}

GaussianSketcher::GaussianSketcher(std::uint64_t seed, std::size_t r, std::size_t m,
                                   bool store)
    : seed_(seed), r_(r), m_(m), fingerprint_(sketcher_fingerprint(seed, r, m)) {
  if (r == 0 || m == 0) throw ContractViolation("GaussianSketcher: r and m must be >= 1");
  const std::size_t total = checked_product(r, m, "GaussianSketcher");
  if (total > std::numeric_limits<std::uint64_t>::max() / 2) {
    throw CapacityError("GaussianSketcher: counter space exhausted");
  }
  if (store) {
    if (total > kMaxStoredEntries) {
      throw CapacityError("GaussianSketcher: storing " + std::to_string(total) +
                          " entries exceeds the cap of " + std::to_string(kMaxStoredEntries));
    }
    columns_.resize(total);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < r; ++i) columns_[j * r + i] = generate_normal(seed, i * m + j);
  }

  // Moment sanity check over the leading entries of the counter stream.
  const std::size_t n = std::min(total, kMomentSampleCap);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double x = stored() ? columns_[(t % m) * r + t / m] : generate_normal(seed, t);
    const double delta = x - mean;
    mean += delta / static_cast<double>(t + 1);
    m2 += delta * (x - mean);
  }
  const double var = m2 / static_cast<double>(n);
  const double root = std::sqrt(static_cast<double>(n));
  if (std::abs(mean) > 5.0 / root || std::abs(var - 1.0) > 10.0 / root) {
    throw NumericFailure("GaussianSketcher: moment check failed (mean " + std::to_string(mean) +
                         ", variance " + std::to_string(var) + ")");
  }
}

double GaussianSketcher::entry(std::size_t i, std::size_t j) const {
  if (i >= r_ || j >= m_) throw ContractViolation("GaussianSketcher::entry: out of range");
  return stored() ? columns_[j * r_ + i] : generate_normal(seed_, i * m_ + j);
}

void GaussianSketcher::axpy_column(std::size_t j, double factor, std::span<double> out) const {
  if (j >= m_) throw ContractViolation("GaussianSketcher: column " + std::to_string(j) +
                                       " out of range " + std::to_string(m_));
  if (out.size() != r_) throw ContractViolation("GaussianSketcher: output length != r");
  if (stored()) {
    const double* col = columns_.data() + j * r_;
    for (std::size_t i = 0; i < r_; ++i) out[i] += factor * col[i];
  } else {
    for (std::size_t i = 0; i < r_; ++i) out[i] += factor * generate_normal(seed_, i * m_ + j);
  }
}

std::vector<double> GaussianSketcher::column(std::size_t j) const {
  std::vector<double> out(r_, 0.0);
  axpy_column(j, 1.0, out);
  return out;
}

DenseMatrix GaussianSketcher::omega() const {
  DenseMatrix out(r_, m_);
  for (std::size_t i = 0; i < r_; ++i)
    for (std::size_t j = 0; j < m_; ++j) out(i, j) = entry(i, j);
  return out;
}

std::vector<double> GaussianSketcher::psg1(std::span<const double> v) const {
  if (v.size() != m_) {
    throw ContractViolation("psg1: input length " + std::to_string(v.size()) + " != m = " +
                            std::to_string(m_));
  }
  std::vector<double> y(r_, 0.0);
  for (std::size_t j = 0; j < m_; ++j)
    if (v[j] != 0.0) axpy_column(j, v[j], y);
  return y;
}

std::vector<double> GaussianSketcher::apply_transpose(std::span<const double> y) const {
  if (y.size() != r_) throw ContractViolation("apply_transpose: input length != r");
  std::vector<double> out(m_);
  for (std::size_t j = 0; j < m_; ++j) {
    double s = 0.0;
    if (stored()) {
      const double* col = columns_.data() + j * r_;
      for (std::size_t i = 0; i < r_; ++i) s += col[i] * y[i];
    } else {
      for (std::size_t i = 0; i < r_; ++i) s += generate_normal(seed_, i * m_ + j) * y[i];
    }
    out[j] = s;
  }
  return out;
}

std::vector<double> GaussianSketcher::psg2(std::span<const double> v) const {
  return apply_transpose(psg1(v));
}

Sketch::Sketch(SketchKind kind, const GaussianSketcher& sketcher, std::size_t cols)
    : kind_(kind),
      seed_(sketcher.seed()),
      r_(sketcher.r()),
      m_(sketcher.m()),
      fingerprint_(sketcher.fingerprint()),
      data_(kind == SketchKind::psg1 ? sketcher.r() : sketcher.m(), cols) {}

Sketch Sketch::from_parts(SketchKind kind, std::uint64_t seed, std::size_t r, std::size_t m,
                          DenseMatrix data) {
  Sketch s;
  s.kind_ = kind;
  s.seed_ = seed;
  s.r_ = r;
  s.m_ = m;
  s.fingerprint_ = sketcher_fingerprint(seed, r, m);
  if (data.rows() != (kind == SketchKind::psg1 ? r : m)) {
    throw ContractViolation("Sketch::from_parts: row count does not match kind");
  }
  s.data_ = std::move(data);
  return s;
}

void Sketch::check_sketcher(const GaussianSketcher& sketcher, std::size_t col) const {
  if (sketcher.fingerprint() != fingerprint_) {
    throw ContractViolation("Sketch: sketcher fingerprint does not match");
  }
  if (col >= cols()) {
    throw ContractViolation("Sketch: column " + std::to_string(col) + " out of range " +
                            std::to_string(cols()));
  }
}

void Sketch::update_column(const GaussianSketcher& sketcher, std::size_t col,
                           std::span<const double> v) {
  check_sketcher(sketcher, col);
  const std::vector<double> y = kind_ == SketchKind::psg1 ? sketcher.psg1(v) : sketcher.psg2(v);
  for (std::size_t i = 0; i < y.size(); ++i) data_(i, col) += y[i];
}

void Sketch::update_entry(const GaussianSketcher& sketcher, std::size_t col, std::size_t index,
                          double value) {
  check_sketcher(sketcher, col);
  if (index >= m_) throw ContractViolation("Sketch::update_entry: index out of range");
  if (value == 0.0) return;
  std::vector<double> y(r_, 0.0);
  sketcher.axpy_column(index, value, y);
  if (kind_ == SketchKind::psg2) y = sketcher.apply_transpose(y);
  for (std::size_t i = 0; i < y.size(); ++i) data_(i, col) += y[i];
}

void Sketch::update_row(const GaussianSketcher& sketcher, std::size_t index,
                        std::span<const double> values) {
  if (values.size() != cols()) throw ContractViolation("Sketch::update_row: wrong number of values");
  if (values.empty()) return;
  check_sketcher(sketcher, 0);
  if (index >= m_) throw ContractViolation("Sketch::update_row: index out of range");
  std::vector<double> y(r_, 0.0);
  sketcher.axpy_column(index, 1.0, y);
  if (kind_ == SketchKind::psg2) y = sketcher.apply_transpose(y);
  for (std::size_t i = 0; i < y.size(); ++i) {
    auto out = data_.row(i);
    for (std::size_t c = 0; c < values.size(); ++c) out[c] += values[c] * y[i];
  }
}

Sketch merge(const Sketch& a, const Sketch& b) {
  if (a.kind() != b.kind()) throw ContractViolation("merge: sketch kinds differ");
  if (a.fingerprint() != b.fingerprint()) throw ContractViolation("merge: fingerprints differ");
  if (a.cols() != b.cols()) throw ContractViolation("merge: column counts differ");
  return Sketch::from_parts(a.kind(), a.seed(), a.r(), a.m(), a.data() + b.data());
}

std::vector<std::uint8_t> serialize(const Sketch& sketch) {
  const auto narrow = [](std::size_t v, const char* field) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
      throw CapacityError(std::string("serialize: ") + field + " does not fit in u32");
    }
    return static_cast<std::uint32_t>(v);
  };
  detail::ByteWriter w;
  w.bytes(kMagic, 4);
  w.uint<std::uint16_t>(kFormatVersion);
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(sketch.kind()));
  w.uint(narrow(sketch.r(), "r"));
  w.uint(narrow(sketch.m(), "m"));
  w.uint(narrow(sketch.cols(), "c"));
  w.uint<std::uint64_t>(sketch.seed());
  w.uint<std::uint64_t>(sketch.fingerprint());
  for (double x : sketch.data().data()) w.f64(x);
  return w.take();
}

Sketch deserialize(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes, "sketch");
  in.expect_magic(kMagic, 4);
  const auto version = in.uint<std::uint16_t>();
  if (version != kFormatVersion) {
    throw FormatError("sketch: unsupported version " + std::to_string(version));
  }
  const auto kind_byte = in.uint<std::uint8_t>();
  if (kind_byte != 1 && kind_byte != 2) {
    throw FormatError("sketch: unknown kind " + std::to_string(kind_byte) + " at offset 6");
  }
  const auto kind = static_cast<SketchKind>(kind_byte);
  const std::size_t r = in.uint<std::uint32_t>();
  const std::size_t m = in.uint<std::uint32_t>();
  const std::size_t c = in.uint<std::uint32_t>();
  const auto seed = in.uint<std::uint64_t>();
  const auto fingerprint = in.uint<std::uint64_t>();
  if (fingerprint != sketcher_fingerprint(seed, r, m)) {
    throw FormatError("sketch: fingerprint does not match (seed, r, m) at offset 27");
  }
  const std::size_t rows = kind == SketchKind::psg1 ? r : m;
  const std::size_t count = checked_product(rows, c, "sketch");
  if (in.remaining() / 8 < count) {
    throw FormatError("sketch: truncated payload, expected " + std::to_string(count) +
                      " values after offset " + std::to_string(in.offset()));
  }
  std::vector<double> data(count);
  for (double& x : data) x = in.f64();
  in.expect_end();
  return Sketch::from_parts(kind, seed, r, m, DenseMatrix(rows, c, std::move(data)));
}

}  // namespace dpsk
