#include "dpsk/regress.hpp"

#include <algorithm>
#include <string>

#include "dpsk/errors.hpp"

namespace dpsk {
namespace {

const RegressConfig& validated(const RegressConfig& c) {
  if (c.n == 0 || c.d == 0) throw ConfigurationError("regress: dimensions must be positive");
  if (c.planned_queries == 0) throw ConfigurationError("regress: planned queries must be >= 1");
  return c;
}

std::size_t sketch_dim(const RegressConfig& c) {
  // ln(1/β) becomes ln(m/β) when m queries share the failure probability.
  const AccuracySpec per_query{c.accuracy.alpha,
                               c.accuracy.beta / static_cast<double>(c.planned_queries)};
  const std::size_t r = guard::linreg_sketch_dim(per_query, c.d, c.dim_constant);
  return std::max(r, c.d);
}

}  // namespace

RegressState::RegressState(const RegressConfig& config)
    : config_(validated(config)),
      layout_{config.n, config.d},
      s_(guard::lift_scale_s(config.budget, static_cast<double>(sketch_dim(config)))),
      sketcher_(config.seed, sketch_dim(config), layout_.height(), config.store_omega),
      ya_(SketchKind::psg1, sketcher_, config.d) {
  guard::compose(config_.budget.eps, config_.budget.delta, 1, config_.composition_delta);
  for (std::size_t c = 0; c < config_.d; ++c) ya_.update_entry(sketcher_, c, c, s_);
}

void RegressState::ingest_column(std::size_t c, std::span<const double> col) {
  if (c >= config_.d) throw ContractViolation("regress: column " + std::to_string(c) + " out of range");
  if (col.size() != config_.n) {
    throw ContractViolation("regress: column has " + std::to_string(col.size()) +
                            " entries, expected " + std::to_string(config_.n));
  }
  std::vector<double> lifted(layout_.height(), 0.0);
  std::copy(col.begin(), col.end(), lifted.begin() + static_cast<std::ptrdiff_t>(layout_.data_index(0)));
  ya_.update_column(sketcher_, c, lifted);
}

void RegressState::ingest_row(std::size_t i, std::span<const double> row) {
  if (i >= config_.n) throw ContractViolation("regress: row " + std::to_string(i) + " out of range");
  if (row.size() != config_.d) {
    throw ContractViolation("regress: row has " + std::to_string(row.size()) +
                            " entries, expected " + std::to_string(config_.d));
  }
  ya_.update_row(sketcher_, layout_.data_index(i), row);
}

void RegressState::update(std::size_t i, std::size_t c, double delta) {
  if (i >= config_.n) throw ContractViolation("regress: row index out of range");
  ya_.update_entry(sketcher_, c, layout_.data_index(i), delta);
}

std::vector<double> RegressState::sketch_query(std::span<const double> b) const {
  if (b.size() != config_.n) {
    throw ContractViolation("regress: query has " + std::to_string(b.size()) +
                            " entries, expected " + std::to_string(config_.n));
  }
  std::vector<double> y(r(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] != 0.0) sketcher_.axpy_column(layout_.data_index(i), b[i], y);
  }
  return y;
}

std::vector<double> RegressState::query(std::span<const double> b) {
  if (config_.max_queries != 0 && queries_ >= config_.max_queries) {
    throw BudgetExhausted("regress: query ceiling of " + std::to_string(config_.max_queries) +
                          " reached");
  }
  guard::compose(config_.budget.eps, config_.budget.delta, queries_ + 1, config_.composition_delta);
  const std::vector<double> yb = sketch_query(b);
  const MinresResult solved = minres_solve(ya_.data().transpose(), DenseMatrix(1, r(), yb));
  ++queries_;
  const auto row = solved.solution.row(0);
  return {row.begin(), row.end()};
}

PrivacyBudget RegressState::composed_budget() const {
  return guard::compose(config_.budget.eps, config_.budget.delta, std::max<std::size_t>(queries_, 1),
                        config_.composition_delta);
}

std::size_t RegressState::retained_entries() const noexcept {
  return ya_.retained_entries() + sketcher_.retained_entries();
}

std::vector<double> ridge_solution(const DenseMatrix& a, std::span<const double> b, double lambda) {
  if (b.size() != a.rows()) throw ContractViolation("ridge_solution: dimension mismatch");
  const std::size_t d = a.cols();
  DenseMatrix normal = matmul_tn(a, a);
  for (std::size_t i = 0; i < d; ++i) normal(i, i) += lambda;
  std::vector<double> rhs(d, 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) rhs[j] += a(i, j) * b[i];
  // Symmetric positive definite: solve through its eigendecomposition.
  const SymmetricEigen eig = symmetric_eigen(normal);
  std::vector<double> x(d, 0.0);
  for (std::size_t t = 0; t < d; ++t) {
    double proj = 0.0;
    for (std::size_t j = 0; j < d; ++j) proj += eig.vectors(j, t) * rhs[j];
    if (eig.values[t] <= 0.0) throw IllPosedSystem("ridge_solution: singular normal matrix", 0.0);
    proj /= eig.values[t];
    for (std::size_t j = 0; j < d; ++j) x[j] += eig.vectors(j, t) * proj;
  }
  return x;
}

}  // namespace dpsk
