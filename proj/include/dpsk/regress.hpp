#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dpsk/guard.hpp"
#include "dpsk/lift.hpp"
#include "dpsk/numerics.hpp"
#include "dpsk/sketch.hpp"

namespace dpsk {

struct RegressConfig {
  std::size_t n = 0;  ///< rows of A
  std::size_t d = 0;  ///< columns of A
  PrivacyBudget budget;
  AccuracySpec accuracy;
  std::uint64_t seed = 0;
  double dim_constant = 16.0;
  /// Expected number of queries. Values above 1 size the sketch for success
  /// probability 1 − β/m per query.
  std::size_t planned_queries = 1;
  /// Refuse queries beyond this count; 0 means no ceiling.
  std::size_t max_queries = 0;
  /// Slack δ′ of the advanced-composition accounting.
  double composition_delta = 1e-6;
  bool store_omega = false;
};

/// Private least squares: A is lifted with an s·I block and sketched once;
/// every query vector b is sketched with the same Ω and the sketched problem
/// min‖Ya·x − Yb‖ is solved. The lift makes this a ridge regression with
/// λ = s², so returned solutions are shrunk toward zero.
class RegressState {
 public:
  explicit RegressState(const RegressConfig& config);

  const RegressConfig& config() const noexcept { return config_; }
  std::size_t r() const noexcept { return sketcher_.r(); }
  double s() const noexcept { return s_; }
  const LiftLayout& layout() const noexcept { return layout_; }
  const GaussianSketcher& sketcher() const noexcept { return sketcher_; }
  const Sketch& sketch() const noexcept { return ya_; }
  std::size_t queries_answered() const noexcept { return queries_; }

  void ingest_column(std::size_t c, std::span<const double> col);
  void ingest_row(std::size_t i, std::span<const double> row);
  void update(std::size_t i, std::size_t c, double delta);

  /// Sketch Ω·b̂ of the lifted query b̂ = (0, 0, b).
  std::vector<double> sketch_query(std::span<const double> b) const;

  /// Least-squares solution of the sketched problem. Throws BudgetExhausted
  /// past the query ceiling or when composition exhausts δ, and
  /// IllPosedSystem if the sketch is numerically rank deficient.
  std::vector<double> query(std::span<const double> b);

  /// Budget consumed by the queries answered so far (at least one release).
  PrivacyBudget composed_budget() const;

  std::size_t retained_entries() const noexcept;

 private:
  RegressConfig config_;
  LiftLayout layout_;
  double s_ = 0.0;
  GaussianSketcher sketcher_;
  Sketch ya_;
  std::size_t queries_ = 0;
};

/// argmin ‖Ax − b‖² + λ‖x‖², through the normal equations.
std::vector<double> ridge_solution(const DenseMatrix& a, std::span<const double> b, double lambda);

}  // namespace dpsk
