// Writes the bundled CLI fixtures: a planted rank-5 200×200 A, a Gaussian
// 200×200 B and a response b = A·x₀ + noise.
#include <filesystem>
#include <iostream>
#include <vector>

#include "dpsk/harness.hpp"
#include "dpsk/matrix_io.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <directory>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  const std::size_t n = 200;
  const dpsk::DenseMatrix a = dpsk::planted_low_rank(n, n, 5, 1);
  const dpsk::DenseMatrix b = dpsk::gaussian_test_matrix(n, n, 2);
  const dpsk::DenseMatrix x0 = dpsk::gaussian_test_matrix(n, 1, 3);
  const dpsk::DenseMatrix noise = dpsk::gaussian_test_matrix(n, 1, 4);
  dpsk::DenseMatrix y = dpsk::matmul(a, x0) + noise;
  dpsk::save_matrix(dir / "a.csv", a, dpsk::MatrixFormat::csv);
  dpsk::save_matrix(dir / "b.csv", b, dpsk::MatrixFormat::csv);
  dpsk::save_matrix(dir / "y.csv", y, dpsk::MatrixFormat::csv);
  return 0;
}
