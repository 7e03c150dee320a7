#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "dpsk/guard.hpp"
#include "dpsk/lift.hpp"
#include "dpsk/numerics.hpp"
#include "dpsk/sketch.hpp"

namespace dpsk {

struct MatProdConfig {
  std::size_t n = 0;   ///< shared row count of A and B
  std::size_t d1 = 0;  ///< columns of A
  std::size_t d2 = 0;  ///< columns of B
  PrivacyBudget budget;
  AccuracySpec accuracy;
  std::uint64_t seed = 0;
  double dim_constant = 8.0;
  /// Materialize Ω instead of regenerating columns from the seed.
  bool store_omega = false;
};

/// Private estimate of AᵀB from one pass over the columns (or rows) of A and B.
///
/// Both inputs are lifted column-wise with an s·I block, streamed through the
/// same r×2(n+d) Gaussian sketcher, and the product of the sketches is scaled
/// by 1/r and de-biased by s²·Ĩ.
class MatProdState {
 public:
  /// Throws ConfigurationError on zero dimensions; domain errors propagate.
  explicit MatProdState(const MatProdConfig& config);

  const MatProdConfig& config() const noexcept { return config_; }
  std::size_t r() const noexcept { return sketcher_.r(); }
  double s() const noexcept { return s_; }
  const LiftLayout& layout() const noexcept { return layout_; }
  const GaussianSketcher& sketcher() const noexcept { return sketcher_; }
  const Sketch& sketch_a() const noexcept { return ya_; }
  const Sketch& sketch_b() const noexcept { return yb_; }

  /// Adds a column of data (length n). Repeated calls accumulate.
  void ingest_a_column(std::size_t a, std::span<const double> col);
  void ingest_b_column(std::size_t b, std::span<const double> col);
  /// Adds row i of A (length d1) or B (length d2).
  void ingest_a_row(std::size_t i, std::span<const double> row);
  void ingest_b_row(std::size_t i, std::span<const double> row);
  /// Single-entry turnstile updates.
  void update_a(std::size_t i, std::size_t a, double delta);
  void update_b(std::size_t i, std::size_t b, double delta);

  /// Adds the data streamed into another state built from the same config.
  void merge_from(const MatProdState& other);

  /// (YaᵀYb)/r − s²·Ĩ, a d1×d2 estimate of AᵀB.
  DenseMatrix product_query() const;

  /// Sketch entries held, plus Ω when stored.
  std::size_t retained_entries() const noexcept;

 private:
  void ingest_column(Sketch& sketch, std::size_t width, std::size_t c,
                     std::span<const double> col);
  void ingest_row(Sketch& sketch, std::size_t width, std::size_t i,
                  std::span<const double> row);

  MatProdConfig config_;
  LiftLayout layout_;
  double s_ = 0.0;
  GaussianSketcher sketcher_;
  Sketch ya_;
  Sketch yb_;
};

}  // namespace dpsk
