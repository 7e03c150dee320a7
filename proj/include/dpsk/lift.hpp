#pragma once

#include <cstddef>

#include "dpsk/numerics.hpp"

namespace dpsk {

/// Column layout shared by the product and regression mechanisms: column c of
/// an n-row matrix is lifted to (s·e_c, 0^{n+d}, A_{:c}) of height 2(n+d).
struct LiftLayout {
  std::size_t n = 0;  ///< rows of the data matrices
  std::size_t d = 0;  ///< width of the identity block

  std::size_t height() const noexcept { return 2 * (n + d); }
  /// Position of data row i inside a lifted column.
  std::size_t data_index(std::size_t i) const noexcept { return 2 * d + n + i; }
};

/// Dense lifted matrix Â for an n×c input with c ≤ layout.d.
inline DenseMatrix lifted_matrix(const DenseMatrix& a, double s, const LiftLayout& layout) {
  DenseMatrix out(layout.height(), a.cols());
  for (std::size_t c = 0; c < a.cols(); ++c) {
    out(c, c) = s;
    for (std::size_t i = 0; i < a.rows(); ++i) out(layout.data_index(i), c) = a(i, c);
  }
  return out;
}

}  // namespace dpsk
