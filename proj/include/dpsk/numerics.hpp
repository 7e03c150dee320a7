#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace dpsk {

/// Row-major dense real matrix. Every numeric object in the library (inputs,
/// random projections, sketches, factors) is carried in one of these.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::vector<double> column(std::size_t j) const;
  void set_column(std::size_t j, std::span<const double> values);

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool all_finite() const noexcept;

  DenseMatrix transpose() const;
  /// Rows [first, first + count).
  DenseMatrix row_block(std::size_t first, std::size_t count) const;
  /// Columns [first, first + count).
  DenseMatrix col_block(std::size_t first, std::size_t count) const;

  DenseMatrix& operator+=(const DenseMatrix& other);
  DenseMatrix& operator-=(const DenseMatrix& other);
  DenseMatrix& operator*=(double factor);

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double factor, DenseMatrix a);

/// a · b. Throws ContractViolation on inner-dimension mismatch.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// aᵀ · b without forming the transpose.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a · bᵀ without forming the transpose.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x);

/// Stacks a over b; column counts must agree.
DenseMatrix vstack(const DenseMatrix& a, const DenseMatrix& b);
/// Places a left of b; row counts must agree.
DenseMatrix hstack(const DenseMatrix& a, const DenseMatrix& b);

double frobenius_norm(const DenseMatrix& m);
double spectral_norm(const DenseMatrix& m);
double norm2(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

/// Thin singular value decomposition m = u · diag(sigma) · vt.
///
/// For an r×c input with q = min(r, c): u is r×q with orthonormal columns,
/// sigma has q non-negative entries in descending order, vt is q×c with
/// orthonormal rows. Columns belonging to zero singular values are completed
/// to an orthonormal set.
struct SvdResult {
  DenseMatrix u;
  std::vector<double> sigma;
  DenseMatrix vt;
};

/// One-sided (Hestenes) Jacobi SVD. Deterministic: the first entry of each left
/// singular vector whose magnitude exceeds 1e-300 is made non-negative.
/// Throws NumericFailure if the sweeps do not converge.
SvdResult svd(const DenseMatrix& m);

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues come back in the order the rotations leave them (no sorting);
/// vectors are the matching columns.
struct SymmetricEigen {
  std::vector<double> values;
  DenseMatrix vectors;
};
SymmetricEigen symmetric_eigen(const DenseMatrix& m);

/// Orthonormal basis for the column span of y.
struct RangeBasis {
  DenseMatrix basis;       ///< rows(y) × rank
  std::size_t rank = 0;
  bool rank_deficient = false;  ///< rank < cols(y)
};

/// Columns of y whose singular values fall at or below rel_tol · sigma_1 are
/// dropped, so a rank-deficient y yields a narrower basis instead of an error.
RangeBasis orthonormal_range(const DenseMatrix& y, double rel_tol = 1e-12);

struct MinresOptions {
  double tol = 1e-10;            ///< relative to ‖rhs‖_F
  std::size_t max_iterations = 0;  ///< 0 means 10 · rows(coeff)
  double rank_tol = 1e-12;       ///< σ_min / σ_max below this is rank deficient
};

struct MinresResult {
  DenseMatrix solution;
  double residual = 0.0;     ///< ‖solution · coeff − rhs‖_F
  std::size_t iterations = 0;
  bool converged = false;    ///< residual ≤ tol · ‖rhs‖_F
};

/// Finds B minimizing ‖B · coeff − rhs‖_F, where coeff is k×ℓ (ℓ ≥ k) and rhs
/// is q×ℓ, so B is q×k. Each row of B is obtained by the minimal residual
/// method (MINRES) on the normal equations (coeff·coeffᵀ) b = coeff · rhs_i,
/// restarted from the current iterate until the residual stalls or the cap is
/// hit. Inconsistent systems return the least-squares optimum with
/// converged = false. Throws IllPosedSystem when coeff is rank deficient.
MinresResult minres_solve(const DenseMatrix& coeff, const DenseMatrix& rhs,
                          const MinresOptions& options = {});

}  // namespace dpsk
