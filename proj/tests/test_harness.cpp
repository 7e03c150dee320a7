#include <cmath>
#include <cstdlib>
#include <vector>

#include "doctest.h"
#include "dpsk/errors.hpp"
#include "dpsk/harness.hpp"
#include "support.hpp"

using dpsk::BoundReport;
using dpsk::DenseMatrix;

namespace {

// Runs body with DPSK_THREADS set to value, restoring the previous setting.
template <class F>
auto with_threads(const char* value, F body) {
  const char* old = std::getenv("DPSK_THREADS");
  const std::string saved = old ? old : "";
  setenv("DPSK_THREADS", value, 1);
  auto out = body();
  if (old) setenv("DPSK_THREADS", saved.c_str(), 1);
  else unsetenv("DPSK_THREADS");
  return out;
}

bool same_report(const BoundReport& a, const BoundReport& b) {
  return dpsk::to_json(a).dump() == dpsk::to_json(b).dump();
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("truncated SVD oracle") {
  const DenseMatrix eye = DenseMatrix::identity(4);
  CHECK(testing::max_abs_diff(dpsk::exact_truncated_svd(eye, 4), eye) <= 1e-14);

  const DenseMatrix d{{3, 0, 0}, {0, 2, 0}, {0, 0, 1}};
  const DenseMatrix want{{3, 0, 0}, {0, 2, 0}, {0, 0, 0}};
  CHECK(testing::max_abs_diff(dpsk::exact_truncated_svd(d, 2), want) <= 1e-14);

  // Eckart–Young: the residual carries exactly the tail of the spectrum.
  const auto a = testing::random_matrix(8, 5, 3);
  const auto sigma = dpsk::svd(a).sigma;
  for (std::size_t k = 0; k <= 5; ++k) {
    double tail = 0.0;
    for (std::size_t j = k; j < sigma.size(); ++j) tail += sigma[j] * sigma[j];
    const double got = dpsk::frobenius_norm(a - dpsk::exact_truncated_svd(a, k));
    CHECK(std::abs(got * got - tail) <= 1e-10 * (1.0 + tail));
  }
  CHECK_THROWS_AS(dpsk::exact_truncated_svd(a, 6), dpsk::ContractViolation);
}

TEST_CASE("least squares and product oracles") {
  const auto a = testing::random_matrix(30, 4, 5);
  const auto x0 = testing::random_vector(4, 6);
  const auto x = dpsk::exact_lsq(a, dpsk::matvec(a, x0));
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(x[j] - x0[j]) <= 1e-10);

  // Rank-deficient: minimum-norm solution puts nothing on the null direction.
  DenseMatrix dup(6, 2);
  for (std::size_t i = 0; i < 6; ++i) dup(i, 0) = dup(i, 1) = 1.0 + static_cast<double>(i);
  const auto m = dpsk::exact_lsq(dup, dup.column(0));
  CHECK(std::abs(m[0] - 0.5) <= 1e-12);
  CHECK(std::abs(m[1] - 0.5) <= 1e-12);

  const auto b = testing::random_matrix(30, 3, 7);
  const DenseMatrix p = dpsk::exact_product(a, b);
  REQUIRE(p.rows() == 4);
  REQUIRE(p.cols() == 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < 30; ++t) s += a(t, i) * b(t, j);
      CHECK(std::abs(p(i, j) - s) <= 1e-12 * (1.0 + std::abs(s)));
    }
  CHECK_THROWS_AS(dpsk::exact_product(a, testing::random_matrix(29, 3, 1)), dpsk::ContractViolation);
}

TEST_CASE("range finder oracle") {
  const auto a = testing::random_matrix(12, 12, 9);
  const auto full = testing::random_matrix(12, 12, 10);
  CHECK(testing::relative_error(dpsk::range_finder_oracle(a, full), a) <= 1e-10);

  // Exact rank 3 is captured by any 5-column test matrix.
  const auto low = dpsk::matmul(testing::random_matrix(12, 3, 11), testing::random_matrix(3, 12, 12));
  CHECK(testing::relative_error(dpsk::range_finder_oracle(low, testing::random_matrix(12, 5, 13)), low) <=
        1e-10);
}

TEST_CASE("planted test data") {
  const auto a = dpsk::planted_low_rank(60, 50, 3, 1);
  const auto sigma = dpsk::svd(a).sigma;
  CHECK(sigma[0] > 250.0);
  CHECK(sigma[2] > 80.0);
  CHECK(sigma[3] < 20.0);
  CHECK(testing::max_abs_diff(a, dpsk::planted_low_rank(60, 50, 3, 1)) == 0.0);
  const auto g = dpsk::gaussian_test_matrix(3, 4, 5, 2.0);
  const auto h = dpsk::gaussian_test_matrix(3, 4, 5);
  CHECK(testing::max_abs_diff(g, 2.0 * h) == 0.0);
}

TEST_CASE("binomial slack") {
  CHECK(dpsk::binomial_slack(0.2, 100) == doctest::Approx(0.12));
  CHECK(dpsk::binomial_slack(0.0, 100) == 0.0);
  CHECK(dpsk::binomial_slack(0.5, 0) == 0.0);
}

TEST_CASE("pseudo-inverse moments") {
  const auto frob = dpsk::mc_pseudoinverse_frobenius(10, 11, 2000, 1);
  CHECK(frob.pass);
  CHECK(*frob.target == doctest::Approx(1.0));
  CHECK(std::abs(*frob.statistic - 1.0) <= 0.05);

  // The mean shrinks as oversampling grows.
  double previous = INFINITY;
  for (std::size_t p : {5u, 7u, 11u}) {
    const auto r = dpsk::mc_pseudoinverse_frobenius(3, p, 2000, 2);
    CHECK(r.pass);
    CHECK(*r.statistic < previous);
    previous = *r.statistic;
  }
  CHECK_THROWS_AS(dpsk::mc_pseudoinverse_frobenius(3, 1, 10), dpsk::ParameterDomainError);

  const auto spec = dpsk::mc_pseudoinverse_spectral(5, 6, 1000, 3);
  CHECK(*spec.target == doctest::Approx(1.5025868).epsilon(1e-6));
  CHECK(spec.pass);
}

TEST_CASE("Johnson-Lindenstrauss rate") {
  const auto r = dpsk::mc_jl(10, 800, 0.2, 50, 64, 4);
  CHECK(r.pass);
  CHECK(r.trials == 500);
  CHECK(r.allowed == doctest::Approx(2.0 * std::exp(-0.04 * 800 / 8.0)));
  CHECK_THROWS_AS(dpsk::mc_jl(10, 800, 1.0, 5), dpsk::ParameterDomainError);
  CHECK_THROWS_AS(dpsk::mc_jl(10, 800, 0.0, 5), dpsk::ParameterDomainError);

  // The distortion is scale free.
  const auto small = dpsk::mc_jl(10, 50, 0.3, 40, 32, 5);
  const auto large = dpsk::mc_jl(10, 50, 0.3, 40, 32, 5, 1e6);
  CHECK(small.violations == large.violations);
  CHECK(small.violations > 0);
}

TEST_CASE("inner product and subspace embedding rates") {
  CHECK(dpsk::mc_inner_product(96, 0.5, 200, 64, 6).pass);
  CHECK(dpsk::mc_subspace_embedding(4, 40, 516, 0.5, 0.2, 40, 7).pass);
  // Far too few rows to embed the subspace.
  CHECK_FALSE(dpsk::mc_subspace_embedding(4, 40, 5, 0.5, 0.2, 40, 7).pass);
}

TEST_CASE("density ratio check") {
  const dpsk::PrivacyBudget unit{1.0, 0.01};
  const auto guarded = dpsk::dp_density_ratio_check(6, 4, unit, 20'000);
  CHECK(guarded.pass);
  CHECK(guarded.allowed == doctest::Approx(0.01 / 8.0));
  CHECK(*guarded.target == doctest::Approx(1.0 / std::sqrt(16.0 * std::log(200.0))));

  dpsk::DensityRatioOptions same;
  same.identical = true;
  const auto identical = dpsk::dp_density_ratio_check(6, 4, unit, 2000, same);
  CHECK(identical.violations == 0);
  CHECK(*identical.statistic == 0.0);

  dpsk::DensityRatioOptions weak;
  weak.scale = 0.05;
  CHECK_THROWS_AS(dpsk::dp_density_ratio_check(6, 4, unit, 100, weak), dpsk::ContractViolation);
  weak.enforce_guard = false;
  const auto exposed = dpsk::dp_density_ratio_check(6, 4, unit, 20'000, weak);
  CHECK_FALSE(exposed.pass);
  CHECK(*exposed.statistic > *exposed.target);
}

TEST_CASE("guard, algebra and space checks") {
  CHECK(dpsk::guard_check_lra(5).pass);
  CHECK(dpsk::guard_check_matprod(5).pass);
  CHECK(dpsk::guard_check_regress(5).pass);
  CHECK(dpsk::sketch_algebra_check(50).pass);
  const auto space = dpsk::space_accounting_check();
  CHECK(space.pass);
  CHECK(space.observed_lhs == space.bound_rhs);
}

TEST_CASE("bound checks respond to error inflation") {
  dpsk::MatProdConfig mp;
  mp.n = 40;
  mp.d1 = 5;
  mp.d2 = 5;
  mp.budget = {1.0, 0.01};
  mp.accuracy = {0.5, 0.2};
  CHECK(dpsk::bound_check_matprod(mp, 10).pass);
  CHECK_FALSE(dpsk::bound_check_matprod(mp, 10, 1000.0).pass);

  dpsk::RegressConfig rg;
  rg.n = 60;
  rg.d = 3;
  rg.budget = {1.0, 0.01};
  rg.accuracy = {0.5, 0.2};
  CHECK(dpsk::bound_check_regress(rg, 10).pass);
  CHECK_FALSE(dpsk::bound_check_regress(rg, 10, 1e9).pass);

  CHECK(dpsk::ridge_equivalence_check(30, 5, 3).pass);
}

TEST_CASE("unbiasedness check detects a missing correction") {
  dpsk::MatProdConfig mp;
  mp.n = 20;
  mp.d1 = 2;
  mp.d2 = 2;
  mp.budget = {1.0, 0.01};
  mp.accuracy = {0.5, 0.2};
  CHECK(dpsk::mc_matprod_unbiased(mp, 500).pass);
  CHECK_FALSE(dpsk::mc_matprod_unbiased(mp, 500, false).pass);
}

TEST_CASE("non-private projection matches the two-pass range finder") {
  dpsk::LraConfig c;
  c.n = 40;
  c.d = 40;
  c.k = 4;
  c.budget = {1.0, 0.01};
  for (bool sym : {true, false}) {
    c.symmetric = sym;
    const auto r = dpsk::lra_nonprivate_check(c, 2);
    CHECK(r.pass);
    for (std::size_t t = 0; t < 2; ++t) CHECK(r.observed_lhs[t] <= r.bound_rhs[t] / 1.5 * (1 + 1e-9));
  }
}

TEST_CASE("report serialization") {
  BoundReport r;
  r.check = "x";
  r.trials = 3;
  r.violations = 1;
  r.allowed = 0.25;
  r.pass = true;
  r.seeds = {1, 2, 3};
  r.observed_lhs = {0.1, 0.2, 0.3};
  r.bound_rhs = {1.0, 1.0, 0.1};
  const auto j = dpsk::to_json(r);
  for (const char* key : {"check", "trials", "violations", "allowed", "slack", "pass", "seeds", "lhs", "rhs"})
    CHECK(j.contains(key));
  CHECK_FALSE(j.contains("statistic"));
  CHECK(j["lhs"][1].get<double>() == 0.2);
  r.statistic = 0.1 + 0.2;
  CHECK(dpsk::to_json(r)["statistic"].get<double>() == 0.1 + 0.2);
}

TEST_CASE("results do not depend on the worker count") {
  CHECK(with_threads("7", [] { return dpsk::harness_threads(); }) == 7);
  CHECK(with_threads("0", [] { return dpsk::harness_threads(); }) >= 1);
  const auto one = with_threads("1", [] { return dpsk::mc_pseudoinverse_frobenius(4, 5, 300, 8); });
  const auto four = with_threads("4", [] { return dpsk::mc_pseudoinverse_frobenius(4, 5, 300, 8); });
  CHECK(same_report(one, four));
  const auto a1 = with_threads("1", [] { return dpsk::sketch_algebra_check(30); });
  const auto a4 = with_threads("4", [] { return dpsk::sketch_algebra_check(30); });
  CHECK(same_report(a1, a4));
  const auto u1 = with_threads("1", [] {
    dpsk::MatProdConfig mp;
    mp.n = 10;
    mp.d1 = 2;
    mp.d2 = 2;
    return dpsk::mc_matprod_unbiased(mp, 100);
  });
  const auto u4 = with_threads("4", [] {
    dpsk::MatProdConfig mp;
    mp.n = 10;
    mp.d1 = 2;
    mp.d2 = 2;
    return dpsk::mc_matprod_unbiased(mp, 100);
  });
  CHECK(same_report(u1, u4));
}

}  // TEST_SUITE
