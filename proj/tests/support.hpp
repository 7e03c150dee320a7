#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dpsk/numerics.hpp"

namespace testing {

// Test data comes from the standard library engine so it never shares code
// with the generator behind the sketches.
inline dpsk::DenseMatrix random_matrix(std::size_t rows, std::size_t cols,
                                       std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  dpsk::DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = scale * normal(gen);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  std::vector<double> v(n);
  for (double& x : v) x = normal(gen);
  return v;
}

inline double max_abs_diff(const dpsk::DenseMatrix& a, const dpsk::DenseMatrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

inline double relative_error(const dpsk::DenseMatrix& got, const dpsk::DenseMatrix& want) {
  const double denom = dpsk::frobenius_norm(want);
  const double diff = dpsk::frobenius_norm(got - want);
  return denom == 0.0 ? diff : diff / denom;
}

inline double orthonormality_defect(const dpsk::DenseMatrix& q) {
  return dpsk::frobenius_norm(dpsk::matmul_tn(q, q) -
                              dpsk::DenseMatrix::identity(q.cols()));
}

}  // namespace testing
