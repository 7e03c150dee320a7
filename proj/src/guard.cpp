#include "dpsk/guard.hpp"

#include <cmath>
#include <string>

#include "dpsk/errors.hpp"

namespace dpsk {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ParameterDomainError(what);
}

void check_budget(const PrivacyBudget& b) {
  require(std::isfinite(b.eps) && b.eps > 0.0, "eps must be positive, got " + std::to_string(b.eps));
  require(b.delta > 0.0 && b.delta < 1.0, "delta must lie in (0, 1), got " + std::to_string(b.delta));
}

void check_accuracy(const AccuracySpec& a) {
  require(a.alpha > 0.0 && a.alpha < 1.0, "alpha must lie in (0, 1), got " + std::to_string(a.alpha));
  require(a.beta > 0.0 && a.beta < 1.0, "beta must lie in (0, 1), got " + std::to_string(a.beta));
}

// ln(x) for a threshold formula; non-positive results are outside the domain.
double positive_log(double x, const char* what) {
  require(x > 1.0, std::string(what) + ": log argument " + std::to_string(x) + " must exceed 1");
  return std::log(x);
}

std::size_t ceil_count(double x, const char* what) {
  require(std::isfinite(x) && x < 1e18, std::string(what) + ": dimension overflow");
  return static_cast<std::size_t>(std::ceil(x));
}

}  // namespace

PrivacyBudget PrivacyBudget::make(double eps, double delta) {
  PrivacyBudget b{eps, delta};
  check_budget(b);
  return b;
}

AccuracySpec AccuracySpec::make(double alpha, double beta) {
  AccuracySpec a{alpha, beta};
  check_accuracy(a);
  return a;
}

namespace guard {

double sigma_min_psg1(const PrivacyBudget& budget, std::size_t r) {
  check_budget(budget);
  require(r >= 1, "sigma_min_psg1: r must be >= 1");
  const double rr = static_cast<double>(r);
  return 4.0 * std::sqrt(rr * std::log(2.0 / budget.delta)) *
         positive_log(rr / budget.delta, "sigma_min_psg1") / budget.eps;
}

double sigma_min_psg2(const PrivacyBudget& budget, std::size_t r) {
  check_budget(budget);
  require(r >= 1, "sigma_min_psg2: r must be >= 1");
  const double rr = static_cast<double>(r);
  return 4.0 * rr * positive_log(rr / budget.delta, "sigma_min_psg2") / budget.eps;
}

double lra_lift_w(const PrivacyBudget& budget, std::size_t k, double c) {
  check_budget(budget);
  require(k >= 1, "lra_lift_w: k must be >= 1");
  require(c > 0.0, "lra_lift_w: constant must be positive");
  const double kk = static_cast<double>(k);
  return c * kk * positive_log(kk / budget.delta, "lra_lift_w") / budget.eps;
}

double lift_scale_s(const PrivacyBudget& budget, double r) {
  check_budget(budget);
  require(r >= 1.0, "lift_scale_s: r must be >= 1");
  return std::sqrt(16.0 * r * std::log(2.0 / budget.delta)) / budget.eps *
         positive_log(16.0 * r / budget.delta, "lift_scale_s");
}

std::size_t matmult_sketch_dim(const AccuracySpec& acc, double c) {
  check_accuracy(acc);
  require(c > 0.0, "matmult_sketch_dim: constant must be positive");
  return ceil_count(c * std::log(2.0 / acc.beta) / (acc.alpha * acc.alpha),
                    "matmult_sketch_dim");
}

std::size_t linreg_sketch_dim(const AccuracySpec& acc, std::size_t d, double c) {
  check_accuracy(acc);
  require(d >= 1, "linreg_sketch_dim: d must be >= 1");
  require(c > 0.0, "linreg_sketch_dim: constant must be positive");
  return ceil_count(c * static_cast<double>(d) * std::log(1.0 / acc.beta) / acc.alpha,
                    "linreg_sketch_dim");
}

PrivacyBudget compose(double eps0, double delta0, std::size_t ell, double delta_prime) {
  require(eps0 > 0.0, "compose: eps0 must be positive");
  require(delta0 > 0.0, "compose: delta0 must be positive");
  require(ell >= 1, "compose: ell must be >= 1");
  require(delta_prime > 0.0 && delta_prime < 1.0, "compose: delta' must lie in (0, 1)");
  const double l = static_cast<double>(ell);
  const double delta = l * delta0 + delta_prime;
  if (!(delta < 1.0)) {
    throw BudgetExhausted("compose: " + std::to_string(ell) + " releases exhaust delta (" +
                          std::to_string(delta) + " >= 1)");
  }
  const double eps = std::sqrt(2.0 * l * std::log(1.0 / delta_prime)) * eps0 + 2.0 * l * eps0 * eps0;
  return {eps, delta};
}

GuardReport verify_spectral_guard(const DenseMatrix& m, double required) {
  GuardReport report;
  report.required_sigma_min = required;
  if (!m.empty()) {
    // Singular values of a wide matrix: only min(rows, cols) exist, and the
    // guard concerns all of them.
    report.observed_sigma_min = svd(m).sigma.back();
  }
  report.passed = report.observed_sigma_min >= required;
  return report;
}

}  // namespace guard
}  // namespace dpsk
