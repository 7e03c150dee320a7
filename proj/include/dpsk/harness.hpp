#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpsk/guard.hpp"
#include "dpsk/lra.hpp"
#include "dpsk/matprod.hpp"
#include "dpsk/numerics.hpp"
#include "dpsk/regress.hpp"
#include "json.hpp"

namespace dpsk {

/// Outcome of a seeded verification. Rate checks count violations against an
/// allowed rate; statistic checks compare one aggregate against a target and
/// record a single violation when it misses.
struct BoundReport {
  std::string check;
  std::size_t trials = 0;
  std::size_t violations = 0;
  double allowed = 0.0;  ///< allowed violation rate
  double slack = 0.0;    ///< binomial slack added to the allowed rate
  bool pass = false;
  std::vector<std::uint64_t> seeds;
  std::vector<double> observed_lhs;
  std::vector<double> bound_rhs;
  std::optional<double> statistic;
  std::optional<double> target;
};

nlohmann::json to_json(const BoundReport& report);

/// 3·√(p(1−p)/trials).
double binomial_slack(double rate, std::size_t trials);

/// Worker count for trial loops: DPSK_THREADS if set and positive, else the
/// hardware concurrency.
std::size_t harness_threads();

/// Runs body(i) for i in [0, count) on harness_threads() workers. Bodies
/// write to their own slot, so results do not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

// Oracles -------------------------------------------------------------------

/// Best rank-k approximation by truncating the full SVD.
DenseMatrix exact_truncated_svd(const DenseMatrix& a, std::size_t k);
/// Minimum-norm least-squares solution of a·x = b.
std::vector<double> exact_lsq(const DenseMatrix& a, std::span<const double> b);
/// aᵀ·b.
DenseMatrix exact_product(const DenseMatrix& a, const DenseMatrix& b);
/// Two-pass randomized range finder: Q = orth(a·omega), result Q·Qᵀ·a.
DenseMatrix range_finder_oracle(const DenseMatrix& a, const DenseMatrix& omega);

// Test data -----------------------------------------------------------------

/// Gaussian matrix from the counter stream, in a key domain apart from sketches.
DenseMatrix gaussian_test_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                 double scale = 1.0);
/// Σ_{t<k} 100·(k − t)·u_t·v_tᵀ plus unit Gaussian noise.
DenseMatrix planted_low_rank(std::size_t n, std::size_t d, std::size_t k, std::uint64_t seed);

// Random-matrix moments -------------------------------------------------------

/// Mean of ‖G⁺‖²_F over k×(k+p) Gaussian G against k/(p−1), relative tolerance.
BoundReport mc_pseudoinverse_frobenius(std::size_t k, std::size_t p, std::size_t trials,
                                       std::uint64_t seed = 0, double tolerance = 0.05);
/// Mean of ‖G⁺‖₂ against the one-sided bound e·√(k+p)/p.
BoundReport mc_pseudoinverse_spectral(std::size_t k, std::size_t p, std::size_t trials,
                                      std::uint64_t seed = 0);
/// Rate of ‖Ωx‖²/r outside (1±α)‖x‖² over fresh r×dim Ω and m fixed vectors,
/// against 2·exp(−α²r/8). Requires 0 < α < 1.
BoundReport mc_jl(std::size_t m_vectors, std::size_t r, double alpha, std::size_t trials,
                  std::size_t dim = 64, std::uint64_t seed = 0, double vector_scale = 1.0);
/// Rate of |⟨Ωu, Ωv⟩/r − ⟨u, v⟩| > α for fixed unit u, v, against 2·exp(−rα²/8).
BoundReport mc_inner_product(std::size_t r, double alpha, std::size_t trials,
                             std::size_t dim = 64, std::uint64_t seed = 0);
/// Rate of ‖UᵀΩᵀΩU/r − I‖₂ > α for a fixed height×d orthonormal U, against β.
BoundReport mc_subspace_embedding(std::size_t d, std::size_t height, std::size_t r, double alpha,
                                  double beta, std::size_t trials, std::uint64_t seed = 0);

// Privacy -------------------------------------------------------------------

struct DensityRatioOptions {
  double scale = 1.1;          ///< σ_min(A) as a multiple of the psg1 threshold
  bool enforce_guard = true;   ///< refuse inputs below the threshold
  bool identical = false;      ///< compare A against itself
  std::uint64_t seed = 0;
};

/// Samples rows x = gᵀA ~ N(0, AᵀA) for an n×n A and evaluates the exact log
/// density ratio against the neighbour Ã = A − u·vᵀ (u, v the bottom singular
/// pair). A sample violates when |ratio| > ε/√(4r·ln(2/δ)); the allowed rate
/// is δ/(2r). Throws ContractViolation when the guard is enforced and either
/// spectrum is below the threshold.
BoundReport dp_density_ratio_check(std::size_t n, std::size_t r, const PrivacyBudget& budget,
                                   std::size_t samples, const DensityRatioOptions& options = {});

/// Lift sufficiency on random instances: verify_spectral_guard against the
/// matching threshold. The LRA check also compares σ_i((wI | A)) with √(w² + σ_i(A)²).
BoundReport guard_check_lra(std::size_t instances, std::uint64_t seed = 0);
BoundReport guard_check_matprod(std::size_t instances, std::uint64_t seed = 0);
BoundReport guard_check_regress(std::size_t instances, std::uint64_t seed = 0);

// Sketch algebra and space ----------------------------------------------------

/// Linearity, determinism, stored/lazy agreement, shard merging, turnstile
/// streaming and psg2 = Ωᵀ∘psg1 at relative tolerance tol, one case per seed.
BoundReport sketch_algebra_check(std::size_t cases, std::uint64_t seed = 0, double tol = 1e-10);

/// Compares the entry counters of every mechanism with the closed forms on a
/// grid of shapes.
BoundReport space_accounting_check();

// Error bounds ---------------------------------------------------------------

struct LraBoundReports {
  BoundReport frobenius;
  BoundReport spectral;
};

/// Runs the LRA mechanism on planted_low_rank inputs, trial t with seed
/// base.seed + t, and checks both error bounds with a 10% allowance. The
/// right-hand sides use the budget the mechanism ran at. error_inflation
/// multiplies the observed errors (negative controls).
LraBoundReports bound_check_lra(const LraConfig& base, std::size_t trials,
                                double error_inflation = 1.0);

/// w = 0, guard bypassed: ‖M − ΨΨᵀM‖_F with the mechanism's Ψ against the
/// two-pass range_finder_oracle value, within factor on every trial. M is A
/// (symmetric, Ω₂) or the block matrix [[0, A], [Aᵀ, 0]] (full Ω).
BoundReport lra_nonprivate_check(const LraConfig& base, std::size_t trials, double factor = 1.5);

/// ‖AᵀB − C‖_F ≤ α‖A‖_F‖B‖_F + s²√n·α on Gaussian inputs, allowed rate β.
BoundReport bound_check_matprod(const MatProdConfig& base, std::size_t trials,
                                double error_inflation = 1.0);

/// Entrywise 3σ test of the Monte-Carlo mean of C against AᵀB over fresh
/// sketchers. With debias = false the s²·Ĩ correction is undone.
BoundReport mc_matprod_unbiased(const MatProdConfig& base, std::size_t trials,
                                bool debias = true);

/// ‖Ax − b‖ ≤ (1+α)·min‖Ay − b‖ + s²√n·α, allowed rate β.
BoundReport bound_check_regress(const RegressConfig& base, std::size_t trials,
                                double error_inflation = 1.0);

/// Exact least squares of the lifted problem against the ridge closed form
/// with λ = s²; passes when the largest relative gap is within tol.
BoundReport ridge_equivalence_check(std::size_t n, std::size_t d, std::size_t instances,
                                    std::uint64_t seed = 0, double tol = 1e-8);

/// Every check above at acceptance scale (quick = reduced trial counts).
std::vector<BoundReport> verification_suite(bool quick);

}  // namespace dpsk
