#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "dpsk/errors.hpp"
#include "dpsk/lra.hpp"
#include "support.hpp"

using dpsk::DenseMatrix;
using dpsk::LraConfig;
using dpsk::LraState;
namespace guard = dpsk::guard;

namespace {

LraConfig base_config(std::size_t n, std::size_t d, std::size_t k, bool symmetric,
                      std::uint64_t seed = 1) {
  LraConfig c;
  c.n = n;
  c.d = d;
  c.k = k;
  c.budget = {1.0, 0.01};
  c.seed = seed;
  c.symmetric = symmetric;
  return c;
}

void stream(LraState& state, const DenseMatrix& a) {
  for (std::size_t i = 0; i < a.rows(); ++i) state.ingest_row(i, a.row(i));
}

// Symmetric matrix with prescribed eigenvalues on random orthonormal vectors.
DenseMatrix symmetric_with_spectrum(std::size_t n, const std::vector<double>& eig,
                                    std::uint64_t seed) {
  const DenseMatrix q = dpsk::svd(testing::random_matrix(n, n, seed)).u;
  DenseMatrix m(n, n);
  for (std::size_t t = 0; t < eig.size(); ++t)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) += eig[t] * q(i, t) * q(j, t);
  return m;
}

DenseMatrix with_singular_values(std::size_t n, std::size_t d, const std::vector<double>& sv,
                                 std::uint64_t seed) {
  const DenseMatrix u = dpsk::svd(testing::random_matrix(n, n, seed)).u;
  const DenseMatrix v = dpsk::svd(testing::random_matrix(d, d, seed + 1000)).u;
  DenseMatrix m(n, d);
  for (std::size_t t = 0; t < sv.size(); ++t)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) m(i, j) += sv[t] * u(i, t) * v(j, t);
  return m;
}

std::size_t numerical_rank(const DenseMatrix& m, double rel) {
  const auto s = dpsk::svd(m).sigma;
  std::size_t r = 0;
  while (r < s.size() && s[r] > rel * s.front()) ++r;
  return r;
}

}  // namespace

TEST_SUITE("lra") {

TEST_CASE("dimensions and lift") {
  auto c = base_config(20, 20, 3, true);
  c.p = 4;
  LraState s(c);
  CHECK(s.omega().rows() == 40);
  CHECK(s.omega().cols() == 7);
  CHECK(s.omega1().rows() == 20);
  CHECK(s.omega2().rows() == 20);
  CHECK(s.y1().rows() == 20);
  CHECK(s.y1().cols() == 7);
  CHECK(s.y2().rows() == 0);
  CHECK(s.w() == guard::lra_lift_w({0.5, 0.005}, 3));

  c.halve_budget = false;
  CHECK(LraState(c).w() == guard::lra_lift_w({1.0, 0.01}, 3));
  CHECK(c.oversampling() == 4);
  c.p = 0;
  CHECK(c.oversampling() == 4);
}

TEST_CASE("configuration errors") {
  auto c = base_config(6, 6, 3, false);
  CHECK_THROWS_AS(LraState{c}, dpsk::ConfigurationError);  // k+p = 7 > 6
  c = base_config(10, 9, 2, true);
  CHECK_THROWS_AS(LraState{c}, dpsk::ConfigurationError);
  c = base_config(10, 10, 2, true);
  c.p = 1;
  CHECK_THROWS_AS(LraState{c}, dpsk::ConfigurationError);
  c.p = 2;
  c.k = 0;
  CHECK_THROWS_AS(LraState{c}, dpsk::ConfigurationError);
}

TEST_CASE("guard is enforced at construction") {
  auto c = base_config(20, 20, 3, true);
  LraState ok(c);
  CHECK(ok.w() >= ok.guard_threshold());
  c.w_override = ok.guard_threshold() * 0.99;
  CHECK_THROWS_AS(LraState{c}, dpsk::GuardViolation);
  c.bypass_guard = true;
  CHECK_NOTHROW(LraState{c});
  c.w_override = 0.0;
  CHECK(LraState(c).w() == 0.0);
}

TEST_CASE("lifted stream clears the guard on random instances") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = testing::random_matrix(12, 12, 300 + seed, 50.0 * static_cast<double>(seed + 1));
    LraState s(base_config(12, 12, 2, false, seed));
    const double w = s.w();
    const DenseMatrix lifted = dpsk::hstack(w * DenseMatrix::identity(12), a);
    const auto report = guard::verify_spectral_guard(lifted, s.guard_threshold());
    CHECK(report.passed);
    const auto got = dpsk::svd(lifted).sigma;
    const auto sa = dpsk::svd(a).sigma;
    for (std::size_t i = 0; i < 12; ++i)
      CHECK(std::abs(got[i] - std::sqrt(w * w + sa[i] * sa[i])) <= 1e-8 * got[i]);
  }
}

TEST_CASE("streaming matches the batch sketch") {
  for (bool sym : {true, false}) {
    const std::size_t n = 15, d = sym ? 15 : 11;
    const auto a = testing::random_matrix(n, d, 77, 10.0);
    auto c = base_config(n, d, 2, sym, 5);
    LraState s(c);
    // Rows arrive out of order.
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t i = (step * 7) % n;
      s.ingest_row(i, a.row(i));
    }
    const DenseMatrix om = s.omega();
    const DenseMatrix lifted = dpsk::hstack(s.w() * DenseMatrix::identity(n), a);
    const DenseMatrix want1 = dpsk::matmul(lifted, om);
    CHECK(testing::relative_error(s.y1(), want1) <= 1e-12);
    if (!sym) {
      const DenseMatrix want2 =
          dpsk::matmul_tn(a, s.omega1()) + s.w() * s.omega2();
      CHECK(testing::relative_error(s.y2(), want2) <= 1e-12);
    }
  }
}

TEST_CASE("a zero row contributes only the lift") {
  auto c = base_config(10, 10, 2, true);
  LraState s(c);
  const std::vector<double> zero(10, 0.0);
  s.ingest_row(4, zero);
  const DenseMatrix o1 = s.omega1();
  for (std::size_t t = 0; t < 5; ++t) CHECK(s.y1()(4, t) == s.w() * o1(4, t));
}

TEST_CASE("one-pass contract") {
  auto c = base_config(10, 8, 2, false);
  LraState s(c);
  const std::vector<double> row(8, 1.0);
  s.ingest_row(3, row);
  CHECK_THROWS_AS(s.ingest_row(3, row), dpsk::OnePassViolation);
  CHECK_THROWS_AS(s.ingest_row(10, row), dpsk::ContractViolation);
  CHECK_THROWS_AS(s.ingest_row(2, std::vector<double>(7, 1.0)), dpsk::ContractViolation);
  CHECK(s.rows_seen() == 1);
  CHECK_THROWS_AS(s.finalize(), dpsk::ContractViolation);
}

TEST_CASE("retained entries") {
  for (bool sym : {true, false}) {
    for (std::size_t n : {10u, 16u}) {
      auto c = base_config(n, n, 2, sym);
      c.p = 3;
      LraState s(c);
      const std::size_t width = 5;
      const std::size_t expected = sym ? 2 * n * width + n * width
                                       : 2 * n * width + 2 * n * width;
      CHECK(s.retained_entries() == expected);
    }
  }
  auto c = base_config(12, 9, 2, false);
  LraState s(c);
  CHECK(s.retained_entries() == (12 + 9) * 5 + (12 + 9) * 5);
}

TEST_CASE("null matrix stays inside the noise band") {
  // With A = 0 the right-hand side of the projection solve cancels exactly up
  // to rounding, so every published eigenvalue is a rounding artifact of size
  // at most a small multiple of machine epsilon times w·‖Ω‖.
  for (bool sym : {true, false}) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const std::size_t n = 12;
      auto c = base_config(n, n, 2, sym, seed);
      LraState s(c);
      stream(s, DenseMatrix(n, n));
      const auto f = s.finalize();
      for (double l : f.lambda) CHECK(std::abs(l) <= 1e-9 * s.w());
      CHECK(dpsk::frobenius_norm(dpsk::reconstruct(f, c)) <= 1e-8 * s.w());
    }
  }
}

TEST_CASE("exact-rank recovery") {
  // The error scales like w·√n/σ_k times the conditioning of the square
  // projection system, which has a heavy tail across seeds.
  const std::size_t n = 40, k = 3;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto c = base_config(n, n, k, true, seed);
    LraState probe(c);
    const double big = 5000.0 * probe.w() * std::sqrt(static_cast<double>(n));
    const auto a = symmetric_with_spectrum(n, {3 * big, -2 * big, big}, 900 + seed);
    LraState s(c);
    stream(s, a);
    const auto f = s.finalize();
    CHECK(f.rank == k);
    CHECK_FALSE(f.reduced_rank);
    CHECK(testing::relative_error(dpsk::reconstruct(f, c), a) <= 0.05);
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t d = 30;
    auto c = base_config(n, d, k, false, seed);
    LraState probe(c);
    const double big = 5000.0 * probe.w() * std::sqrt(static_cast<double>(n + d));
    const auto a = with_singular_values(n, d, {3 * big, 2 * big, big}, 700 + seed);
    LraState s(c);
    stream(s, a);
    const auto f = s.finalize();
    CHECK(f.rank == k);
    CHECK(f.lambda.size() == 2 * k);
    CHECK(testing::relative_error(dpsk::reconstruct(f, c), a) <= 0.05);
  }
}

TEST_CASE("factor shape and reconstruction") {
  for (bool sym : {true, false}) {
    const std::size_t n = 24, d = sym ? 24 : 20, k = 4;
    auto c = base_config(n, d, k, sym, 11);
    const auto a = testing::random_matrix(n, d, 5, 2000.0);
    DenseMatrix input = a;
    if (sym) input = 0.5 * (a + a.transpose());
    LraState s(c);
    stream(s, input);
    const auto f = s.finalize();
    CHECK(testing::orthonormality_defect(f.u_hat) <= 1e-9);
    for (std::size_t t = 1; t < f.lambda.size(); ++t)
      CHECK(std::abs(f.lambda[t]) <= std::abs(f.lambda[t - 1]));
    const DenseMatrix m = dpsk::reconstruct(f, c);
    CHECK(m.rows() == n);
    CHECK(m.cols() == d);
    CHECK(numerical_rank(m, 1e-9) <= k);
    if (sym) CHECK(dpsk::frobenius_norm(m - m.transpose()) == 0.0);
  }
}

TEST_CASE("zero eigenvalues reconstruct to zero") {
  auto c = base_config(5, 5, 2, true);
  dpsk::LowRankFactor f;
  f.u_hat = dpsk::svd(testing::random_matrix(5, 2, 3)).u;
  f.lambda = {0.0, 0.0};
  f.rank = 2;
  CHECK(dpsk::frobenius_norm(dpsk::reconstruct(f, c)) == 0.0);
}

TEST_CASE("rank-deficient input is flagged, not refused") {
  const std::size_t n = 20;
  auto c = base_config(n, n, 4, true, 2);
  c.w_override = 0.0;
  c.bypass_guard = true;
  const auto a = symmetric_with_spectrum(n, {5.0, 2.0}, 31);
  LraState s(c);
  stream(s, a);
  const auto f = s.finalize();
  CHECK(f.reduced_rank);
  CHECK(f.rank == 2);
  CHECK(testing::relative_error(dpsk::reconstruct(f, c), a) <= 1e-8);
}

TEST_CASE("without the lift the mechanism is the classical range finder") {
  const std::size_t n = 40, k = 4;
  std::vector<double> spectrum;
  for (std::size_t i = 0; i < n; ++i) spectrum.push_back(std::pow(0.7, static_cast<double>(i)));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto c = base_config(n, n, k, true, seed);
    c.w_override = 0.0;
    c.bypass_guard = true;
    const auto a = symmetric_with_spectrum(n, spectrum, 60 + seed);
    LraState s(c);
    stream(s, a);
    const DenseMatrix got = dpsk::reconstruct(s.finalize(), c);

    // Two-pass reference: exact projection onto range(AΩ), truncated to rank k.
    const auto q = dpsk::orthonormal_range(dpsk::matmul(a, s.omega2())).basis;
    const auto eig = dpsk::symmetric_eigen(dpsk::matmul(dpsk::matmul_tn(q, a), q));
    std::vector<std::size_t> order(eig.values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return std::abs(eig.values[x]) > std::abs(eig.values[y]);
    });
    DenseMatrix two_pass(n, n);
    for (std::size_t t = 0; t < k; ++t) {
      const auto v = dpsk::matvec(q, eig.vectors.column(order[t]));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) two_pass(i, j) += eig.values[order[t]] * v[i] * v[j];
    }
    const double reference = dpsk::frobenius_norm(a - two_pass);
    CHECK(dpsk::frobenius_norm(a - got) <= 1.5 * reference);
  }
}

}  // TEST_SUITE
