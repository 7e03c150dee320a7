#include "dpsk/lra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dpsk/errors.hpp"

namespace dpsk {
namespace {

std::size_t omega_height(const LraConfig& c) { return c.symmetric ? 2 * c.n : c.n + c.d; }

const LraConfig& validated(const LraConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigurationError("lra: " + what); };
  if (c.n == 0 || c.d == 0) fail("dimensions must be positive");
  if (c.symmetric && c.n != c.d) fail("symmetric path needs n == d");
  if (c.k == 0) fail("k must be >= 1");
  if (c.oversampling() < 2) fail("oversampling p must be >= 2");
  const std::size_t width = c.sketch_width();
  if (width > c.n || (!c.symmetric && width > c.d)) {
    fail("k+p = " + std::to_string(width) + " exceeds the matrix dimensions");
  }
  if (c.w_override && !(std::isfinite(*c.w_override) && *c.w_override >= 0.0)) {
    fail("w override must be finite and non-negative");
  }
  return c;
}

// Index order of the top `count` entries by magnitude; equal magnitudes keep
// the eigensolver's order.
std::vector<std::size_t> top_by_magnitude(const std::vector<double>& values, std::size_t count) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(values[a]) > std::abs(values[b]);
  });
  order.resize(std::min(count, order.size()));
  return order;
}

// Values at or below this fraction of the largest magnitude count as zero.
constexpr double kNonzeroTol = 1e-12;

std::size_t count_nonzero(const std::vector<double>& sorted_magnitudes) {
  if (sorted_magnitudes.empty() || sorted_magnitudes.front() <= 0.0) return 0;
  const double cutoff = kNonzeroTol * sorted_magnitudes.front();
  std::size_t q = 0;
  while (q < sorted_magnitudes.size() && sorted_magnitudes[q] > cutoff) ++q;
  return q;
}

DenseMatrix symmetrized(const DenseMatrix& b) {
  DenseMatrix s(b.rows(), b.cols());
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) s(i, j) = 0.5 * (b(i, j) + b(j, i));
  return s;
}

// Solves B·coeff = rhs for the projected matrix and symmetrizes it.
DenseMatrix projected_matrix(const DenseMatrix& coeff, const DenseMatrix& rhs) {
  const MinresResult solved = minres_solve(coeff, rhs);
  return symmetrized(solved.solution);
}

LowRankFactor finalize_symmetric(const LraConfig& c, const DenseMatrix& omega, double w,
                                 const DenseMatrix& y1) {
  const DenseMatrix omega1 = omega.row_block(0, c.n);
  const DenseMatrix omega2 = omega.row_block(c.n, c.n);
  const RangeBasis range = orthonormal_range(y1);
  const DenseMatrix& psi = range.basis;

  DenseMatrix rhs = matmul_tn(psi, y1);
  rhs -= w * matmul_tn(psi, omega1);
  const DenseMatrix b = projected_matrix(matmul_tn(psi, omega2), rhs);

  const SymmetricEigen eig = symmetric_eigen(b);
  const auto order = top_by_magnitude(eig.values, c.k);
  std::vector<double> mags;
  for (std::size_t idx : order) mags.push_back(std::abs(eig.values[idx]));
  const std::size_t q = count_nonzero(mags);

  DenseMatrix ubar(b.rows(), q);
  LowRankFactor out;
  for (std::size_t t = 0; t < q; ++t) {
    ubar.set_column(t, eig.vectors.column(order[t]));
    out.lambda.push_back(eig.values[order[t]]);
  }
  out.u_hat = matmul(psi, ubar);
  out.rank = q;
  out.reduced_rank = q < c.k;
  out.symmetric = true;
  out.n = c.n;
  return out;
}

LowRankFactor finalize_block(const LraConfig& c, const DenseMatrix& omega, double w,
                             const DenseMatrix& y1, const DenseMatrix& y2) {
  const DenseMatrix y = vstack(y1, y2);
  const RangeBasis range = orthonormal_range(y);
  const DenseMatrix& psi = range.basis;

  // The block matrix is w·I + [[0, A], [Aᵀ, 0]], so the identity part of the
  // sketch is w·Ω over the full height.
  DenseMatrix rhs = matmul_tn(psi, y);
  rhs -= w * matmul_tn(psi, omega);
  const DenseMatrix b = projected_matrix(matmul_tn(psi, omega), rhs);

  // Off-diagonal block Ψ_top·B·Ψ_botᵀ through thin factorizations of both halves.
  const SvdResult top = svd(psi.row_block(0, c.n));
  const SvdResult bot = svd(psi.row_block(c.n, c.d));
  auto r_factor = [](const SvdResult& f) {
    DenseMatrix r = f.vt;
    for (std::size_t i = 0; i < r.rows(); ++i)
      for (std::size_t j = 0; j < r.cols(); ++j) r(i, j) *= f.sigma[i];
    return r;
  };
  const DenseMatrix core = matmul_nt(matmul(r_factor(top), b), r_factor(bot));
  const SvdResult cf = svd(core);

  std::vector<double> mags(cf.sigma.begin(),
                           cf.sigma.begin() + static_cast<std::ptrdiff_t>(std::min(c.k, cf.sigma.size())));
  const std::size_t q = count_nonzero(mags);
  const DenseMatrix x = matmul(top.u, cf.u.col_block(0, q));
  const DenseMatrix yv = matmul_nt(bot.u, cf.vt.row_block(0, q));

  LowRankFactor out;
  out.u_hat = DenseMatrix(c.n + c.d, 2 * q);
  const double h = 1.0 / std::sqrt(2.0);
  for (std::size_t t = 0; t < q; ++t) {
    for (std::size_t i = 0; i < c.n; ++i) {
      out.u_hat(i, 2 * t) = h * x(i, t);
      out.u_hat(i, 2 * t + 1) = h * x(i, t);
    }
    for (std::size_t j = 0; j < c.d; ++j) {
      out.u_hat(c.n + j, 2 * t) = h * yv(j, t);
      out.u_hat(c.n + j, 2 * t + 1) = -h * yv(j, t);
    }
    out.lambda.push_back(cf.sigma[t]);
    out.lambda.push_back(-cf.sigma[t]);
  }
  out.rank = q;
  out.reduced_rank = q < c.k;
  out.symmetric = false;
  out.n = c.n;
  return out;
}

}  // namespace

LraState::LraState(const LraConfig& config)
    : config_(validated(config)),
      sketcher_(config.seed, config.sketch_width(), omega_height(config), true),
      y1_(config.n, config.sketch_width()),
      y2_(config.symmetric ? 0 : config.d, config.sketch_width()),
      seen_(config.n, false) {
  const PrivacyBudget eff = config_.effective_budget();
  const double computed = guard::lra_lift_w(eff, config_.k, config_.lift_constant);
  w_ = config_.w_override.value_or(computed);
  if (!config_.bypass_guard && w_ < guard_threshold()) {
    throw GuardViolation("lra: lift w = " + std::to_string(w_) + " is below the guard threshold " +
                         std::to_string(guard_threshold()) + " at k+p = " +
                         std::to_string(config_.sketch_width()));
  }
  // The lower block of the embedding carries w·I_d before any row arrives.
  const std::size_t width = config_.sketch_width();
  if (!config_.symmetric) {
    for (std::size_t j = 0; j < config_.d; ++j)
      for (std::size_t t = 0; t < width; ++t) y2_(j, t) = w_ * sketcher_.entry(t, config_.n + j);
  }
}

double LraState::guard_threshold() const {
  const PrivacyBudget eff = config_.effective_budget();
  const std::size_t width = config_.sketch_width();
  return std::max(guard::sigma_min_psg1(eff, width), guard::sigma_min_psg2(eff, width));
}

DenseMatrix LraState::omega() const { return sketcher_.omega().transpose(); }

DenseMatrix LraState::omega1() const { return omega().row_block(0, config_.n); }

DenseMatrix LraState::omega2() const {
  return omega().row_block(config_.n, omega_height(config_) - config_.n);
}

void LraState::ingest_row(std::size_t i, std::span<const double> row) {
  if (i >= config_.n) {
    throw ContractViolation("lra: row index " + std::to_string(i) + " out of range");
  }
  if (row.size() != config_.d) {
    throw ContractViolation("lra: row has " + std::to_string(row.size()) + " entries, expected " +
                            std::to_string(config_.d));
  }
  if (seen_[i]) throw OnePassViolation("lra: row " + std::to_string(i) + " ingested twice");

  // Row i of the lifted matrix is (w·e_i, A_i:), so its sketch is
  // w·Ω[i, :] + Σ_j A_ij·Ω[n + j, :].
  std::span<double> out = y1_.row(i);
  sketcher_.axpy_column(i, w_, out);
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] != 0.0) sketcher_.axpy_column(config_.n + j, row[j], out);
  }
  if (!config_.symmetric) {
    const std::vector<double> omega_i = sketcher_.column(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] == 0.0) continue;
      std::span<double> target = y2_.row(j);
      for (std::size_t t = 0; t < omega_i.size(); ++t) target[t] += row[j] * omega_i[t];
    }
  }
  seen_[i] = true;
  ++rows_seen_;
}

DenseMatrix LraState::range_basis() const {
  return orthonormal_range(config_.symmetric ? y1_ : vstack(y1_, y2_)).basis;
}

LowRankFactor LraState::finalize() const {
  if (rows_seen_ != config_.n) {
    throw ContractViolation("lra: finalize after " + std::to_string(rows_seen_) + " of " +
                            std::to_string(config_.n) + " rows");
  }
  const DenseMatrix om = omega();
  return config_.symmetric ? finalize_symmetric(config_, om, w_, y1_)
                           : finalize_block(config_, om, w_, y1_, y2_);
}

std::size_t LraState::retained_entries() const noexcept {
  return sketcher_.retained_entries() + y1_.size() + y2_.size();
}

DenseMatrix reconstruct(const LowRankFactor& factor, const LraConfig& config) {
  const DenseMatrix& u = factor.u_hat;
  const std::size_t q = factor.lambda.size();
  if (factor.symmetric) {
    const std::size_t n = u.rows();
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < q; ++t) s += factor.lambda[t] * (u(i, t) * u(j, t));
        m(i, j) = s;
        m(j, i) = s;
      }
    return m;
  }
  const std::size_t n = config.n;
  const std::size_t d = config.d;
  DenseMatrix m(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < q; ++t) s += factor.lambda[t] * (u(i, t) * u(n + j, t));
      m(i, j) = s;
    }
  return m;
}

}  // namespace dpsk
