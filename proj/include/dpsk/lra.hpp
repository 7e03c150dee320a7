#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dpsk/guard.hpp"
#include "dpsk/numerics.hpp"
#include "dpsk/sketch.hpp"

namespace dpsk {

struct LraConfig {
  std::size_t n = 0;  ///< rows of A
  std::size_t d = 0;  ///< columns of A (must equal n when symmetric)
  std::size_t k = 1;  ///< target rank
  std::size_t p = 0;  ///< oversampling; 0 means k + 1
  PrivacyBudget budget;
  std::uint64_t seed = 0;
  bool symmetric = false;
  /// Run the mechanism at (ε/2, δ/2); the symmetric embedding costs half the budget.
  bool halve_budget = true;
  double lift_constant = 16.0;
  /// Replaces the computed lift w. Refused unless it clears the guard or
  /// bypass_guard is set.
  std::optional<double> w_override;
  /// Skips the guard check. Only for non-private reference runs in tests.
  bool bypass_guard = false;

  std::size_t oversampling() const noexcept { return p ? p : k + 1; }
  std::size_t sketch_width() const noexcept { return k + oversampling(); }
  PrivacyBudget effective_budget() const { return halve_budget ? budget.halved() : budget; }
};

/// Published factorization Û·diag(λ)·Ûᵀ.
///
/// Symmetric path: Û is n×q, q ≤ k. Non-symmetric path: Û lives in the
/// (n+d)-dimensional embedding and holds eigenpairs (x; ±y)/√2 with
/// eigenvalues ±s_j for each of the top q singular triplets of the
/// approximation, so it has 2q columns.
struct LowRankFactor {
  DenseMatrix u_hat;
  std::vector<double> lambda;
  std::size_t rank = 0;        ///< q
  bool reduced_rank = false;   ///< q < k
  bool symmetric = true;
  std::size_t n = 0;           ///< rows of the approximated matrix
};

/// One-pass private rank-k approximation of a streamed matrix.
///
/// The stream is lifted to (w·e_i, A_i:) so every singular value of the
/// streamed matrix is at least w, then sketched against one Gaussian Ω that
/// is stored and reused in the projection step. The non-symmetric path sketches
/// the block matrix [[w·I, A], [Aᵀ, w·I]] and keeps a second accumulator.
class LraState {
 public:
  /// Throws ConfigurationError on bad dimensions and GuardViolation when a
  /// w override is below the guard.
  explicit LraState(const LraConfig& config);

  const LraConfig& config() const noexcept { return config_; }
  double w() const noexcept { return w_; }
  std::size_t rows_seen() const noexcept { return rows_seen_; }

  /// Guard threshold the lifted stream has to clear:
  /// max(σ_min psg1, σ_min psg2) at r = k + p under the effective budget.
  double guard_threshold() const;

  /// Ω of the mechanism, (sym ? 2n : n+d) × (k+p); top block ω₁ (n rows).
  DenseMatrix omega() const;
  DenseMatrix omega1() const;
  DenseMatrix omega2() const;
  const DenseMatrix& y1() const noexcept { return y1_; }
  const DenseMatrix& y2() const noexcept { return y2_; }

  /// Ψ: orthonormal basis of the accumulated sketch (y1, or y1 over y2).
  DenseMatrix range_basis() const;

  /// Streams row i of A. Each index is accepted once.
  void ingest_row(std::size_t i, std::span<const double> row);

  /// Requires every row. Throws IllPosedSystem if the projection solve fails.
  LowRankFactor finalize() const;

  /// Matrix entries held: Ω plus the accumulators.
  std::size_t retained_entries() const noexcept;

 private:
  LraConfig config_;
  double w_ = 0.0;
  GaussianSketcher sketcher_;  // r = k+p, m = height of Ω
  DenseMatrix y1_;
  DenseMatrix y2_;
  std::vector<bool> seen_;
  std::size_t rows_seen_ = 0;
};

/// Dense Û·diag(λ)·Ûᵀ (symmetric) or its top-right n×d block (non-symmetric).
DenseMatrix reconstruct(const LowRankFactor& factor, const LraConfig& config);

}  // namespace dpsk
