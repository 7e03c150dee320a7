#pragma once

#include <cstddef>

#include "dpsk/numerics.hpp"

namespace dpsk {

/// (ε, δ) privacy parameters. Construct through make() to validate.
struct PrivacyBudget {
  double eps = 1.0;
  double delta = 0.01;

  /// Throws ParameterDomainError unless eps > 0 and 0 < delta < 1.
  static PrivacyBudget make(double eps, double delta);
  PrivacyBudget halved() const { return {eps / 2.0, delta / 2.0}; }
};

/// (α, β) accuracy parameters: error α with probability at least 1 − β.
struct AccuracySpec {
  double alpha = 0.5;
  double beta = 0.1;

  /// Throws ParameterDomainError unless both lie in (0, 1).
  static AccuracySpec make(double alpha, double beta);
};

struct GuardReport {
  double required_sigma_min = 0.0;
  double observed_sigma_min = 0.0;
  bool passed = false;
};

/// Multiplicative constants behind the threshold formulas. The defaults are
/// the library's calibrated values; overriding them is for experiments only.
struct GuardConstants {
  double lra_c = 16.0;        ///< w = c·k·ln(k/δ)/ε
  double matmult_c = 8.0;     ///< r = ⌈c·ln(2/β)/α²⌉
  double linreg_c = 16.0;     ///< r = ⌈c·d·ln(1/β)/α⌉
};

namespace guard {

/// Smallest singular value at which streaming through Ω·v is (ε, δ)-private:
/// 4·√(r·ln(2/δ))·ln(r/δ)/ε.
double sigma_min_psg1(const PrivacyBudget& budget, std::size_t r);

/// Same for the ΩᵀΩ·v generator: 4·r·ln(r/δ)/ε.
double sigma_min_psg2(const PrivacyBudget& budget, std::size_t r);

/// Identity-lift magnitude of the low-rank mechanism: c·k·ln(k/δ)/ε.
double lra_lift_w(const PrivacyBudget& budget, std::size_t k, double c = 16.0);

/// Identity-lift magnitude of the product and regression mechanisms:
/// √(16·r·ln(2/δ))/ε · ln(16·r/δ). Accepts a real r so the closed form can be
/// evaluated off the integer grid.
double lift_scale_s(const PrivacyBudget& budget, double r);

std::size_t matmult_sketch_dim(const AccuracySpec& acc, double c = 8.0);
std::size_t linreg_sketch_dim(const AccuracySpec& acc, std::size_t d, double c = 16.0);

/// Advanced composition of ell releases, each (eps0, delta0)-private:
/// (√(2ℓ·ln(1/δ′))·ε₀ + 2ℓ·ε₀², ℓ·δ₀ + δ′). Throws BudgetExhausted when the
/// resulting δ is not below 1.
PrivacyBudget compose(double eps0, double delta0, std::size_t ell, double delta_prime);

/// Compares σ_min(m) against the required threshold.
GuardReport verify_spectral_guard(const DenseMatrix& m, double required);

}  // namespace guard
}  // namespace dpsk
