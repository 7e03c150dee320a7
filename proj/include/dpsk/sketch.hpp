#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dpsk/numerics.hpp"

namespace dpsk {

/// Version of the normal-variate stream. Bump if generate_normal changes.
inline constexpr std::uint16_t kGeneratorVersion = 1;

/// Standard normal variate number `index` of the stream keyed by `seed`.
///
/// Counter based: two SplitMix64 outputs of (seed, index) feed the cosine
/// branch of Box-Muller. Any entry can be produced independently of the
/// others, which is what lets a sketcher regenerate one column on demand.
double generate_normal(std::uint64_t seed, std::uint64_t index) noexcept;

/// 64-bit identity of a sketcher; two sketches can be combined only when
/// their fingerprints agree.
std::uint64_t sketcher_fingerprint(std::uint64_t seed, std::uint64_t r,
                                   std::uint64_t m) noexcept;

/// Seeded r×m Gaussian matrix Ω, entry (i, j) = generate_normal(seed, i·m + j).
///
/// With store = true the matrix is materialized once; otherwise columns are
/// regenerated when needed. Both modes produce bit-identical results.
class GaussianSketcher {
 public:
  /// Largest Ω that will be materialized.
  static constexpr std::size_t kMaxStoredEntries = std::size_t{1} << 28;

  GaussianSketcher(std::uint64_t seed, std::size_t r, std::size_t m, bool store = true);

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t r() const noexcept { return r_; }
  std::size_t m() const noexcept { return m_; }
  bool stored() const noexcept { return !columns_.empty(); }
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }
  /// Entries held in memory (r·m when stored, else 0).
  std::size_t retained_entries() const noexcept { return columns_.size(); }

  double entry(std::size_t i, std::size_t j) const;
  std::vector<double> column(std::size_t j) const;
  /// The full r×m matrix (materialized on the fly if not stored).
  DenseMatrix omega() const;

  /// Ω·v.
  std::vector<double> psg1(std::span<const double> v) const;
  /// Ωᵀ(Ω·v), computed through psg1 so the two agree bit for bit.
  std::vector<double> psg2(std::span<const double> v) const;
  /// Ωᵀ·y for y of length r.
  std::vector<double> apply_transpose(std::span<const double> y) const;

  /// out += factor · Ω[:, j].
  void axpy_column(std::size_t j, double factor, std::span<double> out) const;

 private:
  std::uint64_t seed_;
  std::size_t r_;
  std::size_t m_;
  std::uint64_t fingerprint_;
  std::vector<double> columns_;  // column-major copy of Ω when stored
};

enum class SketchKind : std::uint8_t { psg1 = 1, psg2 = 2 };

/// Column sketch of a streamed matrix: column c holds Ω·v_c (psg1, r rows) or
/// ΩᵀΩ·v_c (psg2, m rows). Updates add, so any stream of turnstile increments
/// lands at the sketch of their sum.
class Sketch {
 public:
  Sketch() = default;
  Sketch(SketchKind kind, const GaussianSketcher& sketcher, std::size_t cols);

  SketchKind kind() const noexcept { return kind_; }
  std::size_t rows() const noexcept { return data_.rows(); }
  std::size_t cols() const noexcept { return data_.cols(); }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t r() const noexcept { return r_; }
  std::size_t m() const noexcept { return m_; }
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }

  const DenseMatrix& data() const noexcept { return data_; }
  std::vector<double> column(std::size_t col) const { return data_.column(col); }
  std::size_t retained_entries() const noexcept { return data_.size(); }

  /// Column col += psg(v). A zero v is a no-op.
  void update_column(const GaussianSketcher& sketcher, std::size_t col,
                     std::span<const double> v);
  /// Column col += psg(value · e_index): a single-entry turnstile update.
  void update_entry(const GaussianSketcher& sketcher, std::size_t col, std::size_t index,
                    double value);
  /// update_entry(col, index, values[col]) for every column, generating the
  /// Ω column once.
  void update_row(const GaussianSketcher& sketcher, std::size_t index,
                  std::span<const double> values);

  /// Rebuilds a sketch from raw parts; used by deserialization.
  static Sketch from_parts(SketchKind kind, std::uint64_t seed, std::size_t r,
                           std::size_t m, DenseMatrix data);

  friend bool operator==(const Sketch&, const Sketch&) = default;

 private:
  void check_sketcher(const GaussianSketcher& sketcher, std::size_t col) const;

  SketchKind kind_ = SketchKind::psg1;
  std::uint64_t seed_ = 0;
  std::size_t r_ = 0;
  std::size_t m_ = 0;
  std::uint64_t fingerprint_ = 0;
  DenseMatrix data_;
};

/// Entrywise sum of two sketches taken with the same sketcher and kind.
Sketch merge(const Sketch& a, const Sketch& b);

/// "DPSK" | version u16 | kind u8 | r u32 | m u32 | c u32 | seed u64 |
/// fingerprint u64 | data as little-endian f64, row-major.
std::vector<std::uint8_t> serialize(const Sketch& sketch);
Sketch deserialize(std::span<const std::uint8_t> bytes);

}  // namespace dpsk
