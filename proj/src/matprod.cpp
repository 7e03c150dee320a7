#include "dpsk/matprod.hpp"

#include <algorithm>
#include <string>

#include "dpsk/errors.hpp"

namespace dpsk {
namespace {

const MatProdConfig& validated(const MatProdConfig& c) {
  if (c.n == 0 || c.d1 == 0 || c.d2 == 0) {
    throw ConfigurationError("matprod: dimensions must be positive");
  }
  return c;
}

std::size_t sketch_dim(const MatProdConfig& c) {
  return guard::matmult_sketch_dim(c.accuracy, c.dim_constant);
}

// Adds s·Ω[:, c] to every column: the identity block of the lift.
void apply_lift(Sketch& sketch, const GaussianSketcher& sketcher, double s) {
  for (std::size_t c = 0; c < sketch.cols(); ++c) sketch.update_entry(sketcher, c, c, s);
}

}  // namespace

MatProdState::MatProdState(const MatProdConfig& config)
    : config_(validated(config)),
      layout_{config.n, std::max(config.d1, config.d2)},
      s_(guard::lift_scale_s(config.budget, static_cast<double>(sketch_dim(config)))),
      sketcher_(config.seed, sketch_dim(config), layout_.height(), config.store_omega),
      ya_(SketchKind::psg1, sketcher_, config.d1),
      yb_(SketchKind::psg1, sketcher_, config.d2) {
  apply_lift(ya_, sketcher_, s_);
  apply_lift(yb_, sketcher_, s_);
}

void MatProdState::ingest_column(Sketch& sketch, std::size_t width, std::size_t c,
                                 std::span<const double> col) {
  if (c >= width) {
    throw ContractViolation("matprod: column " + std::to_string(c) + " out of range " +
                            std::to_string(width));
  }
  if (col.size() != config_.n) {
    throw ContractViolation("matprod: column has " + std::to_string(col.size()) +
                            " entries, expected " + std::to_string(config_.n));
  }
  std::vector<double> lifted(layout_.height(), 0.0);
  std::copy(col.begin(), col.end(), lifted.begin() + static_cast<std::ptrdiff_t>(layout_.data_index(0)));
  sketch.update_column(sketcher_, c, lifted);
}

void MatProdState::ingest_row(Sketch& sketch, std::size_t width, std::size_t i,
                              std::span<const double> row) {
  if (i >= config_.n) {
    throw ContractViolation("matprod: row " + std::to_string(i) + " out of range");
  }
  if (row.size() != width) {
    throw ContractViolation("matprod: row has " + std::to_string(row.size()) +
                            " entries, expected " + std::to_string(width));
  }
  sketch.update_row(sketcher_, layout_.data_index(i), row);
}

void MatProdState::ingest_a_column(std::size_t a, std::span<const double> col) {
  ingest_column(ya_, config_.d1, a, col);
}

void MatProdState::ingest_b_column(std::size_t b, std::span<const double> col) {
  ingest_column(yb_, config_.d2, b, col);
}

void MatProdState::ingest_a_row(std::size_t i, std::span<const double> row) {
  ingest_row(ya_, config_.d1, i, row);
}

void MatProdState::ingest_b_row(std::size_t i, std::span<const double> row) {
  ingest_row(yb_, config_.d2, i, row);
}

void MatProdState::update_a(std::size_t i, std::size_t a, double delta) {
  if (i >= config_.n) throw ContractViolation("matprod: row index out of range");
  ya_.update_entry(sketcher_, a, layout_.data_index(i), delta);
}

void MatProdState::update_b(std::size_t i, std::size_t b, double delta) {
  if (i >= config_.n) throw ContractViolation("matprod: row index out of range");
  yb_.update_entry(sketcher_, b, layout_.data_index(i), delta);
}

void MatProdState::merge_from(const MatProdState& other) {
  if (other.sketcher_.fingerprint() != sketcher_.fingerprint() || other.s_ != s_ ||
      other.config_.d1 != config_.d1 || other.config_.d2 != config_.d2) {
    throw ContractViolation("matprod: merge of states with different configurations");
  }
  // Both states carry the lift; keep one copy.
  ya_ = merge(ya_, other.ya_);
  yb_ = merge(yb_, other.yb_);
  apply_lift(ya_, sketcher_, -s_);
  apply_lift(yb_, sketcher_, -s_);
}

DenseMatrix MatProdState::product_query() const {
  DenseMatrix c = matmul_tn(ya_.data(), yb_.data());
  c *= 1.0 / static_cast<double>(r());
  const double s2 = s_ * s_;
  for (std::size_t i = 0; i < std::min(config_.d1, config_.d2); ++i) c(i, i) -= s2;
  return c;
}

std::size_t MatProdState::retained_entries() const noexcept {
  return ya_.retained_entries() + yb_.retained_entries() + sketcher_.retained_entries();
}

}  // namespace dpsk
