#include "dpsk/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "dpsk/errors.hpp"

namespace dpsk {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr std::size_t kMaxJacobiSweeps = 80;

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " +
                            std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                            " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
}

// Rows of `w` are the columns being orthogonalized; `v` accumulates the
// rotations (rows of v are columns of V). Returns false if the sweep cap hit.
bool hestenes_sweeps(DenseMatrix& w, DenseMatrix& v) {
  const std::size_t n = w.rows();
  const std::size_t len = w.cols();
  for (std::size_t sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto wp = w.row(p);
        auto wq = w.row(q);
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t t = 0; t < len; ++t) {
          alpha += wp[t] * wp[t];
          beta += wq[t] * wq[t];
          gamma += wp[t] * wq[t];
        }
        if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t_rot =
            std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t_rot * t_rot);
        const double s = c * t_rot;
        for (std::size_t t = 0; t < len; ++t) {
          const double x = wp[t];
          const double y = wq[t];
          wp[t] = c * x - s * y;
          wq[t] = s * x + c * y;
        }
        auto vp = v.row(p);
        auto vq = v.row(q);
        for (std::size_t t = 0; t < v.cols(); ++t) {
          const double x = vp[t];
          const double y = vq[t];
          vp[t] = c * x - s * y;
          vq[t] = s * x + c * y;
        }
      }
    }
    if (!rotated) return true;
  }
  return false;
}

// Completes the rows of `q` flagged in `missing` so that all rows are
// orthonormal, by Gram-Schmidt against the standard basis.
void complete_orthonormal_rows(DenseMatrix& q, const std::vector<bool>& missing) {
  const std::size_t len = q.cols();
  std::size_t next_basis = 0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    if (!missing[i]) continue;
    while (next_basis < len) {
      std::vector<double> cand(len, 0.0);
      cand[next_basis++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < q.rows(); ++j) {
          if (j == i || (missing[j] && j > i)) continue;
          const double proj = dot(cand, q.row(j));
          for (std::size_t t = 0; t < len; ++t) cand[t] -= proj * q(j, t);
        }
      }
      const double nrm = norm2(cand);
      if (nrm > 0.5) {
        for (std::size_t t = 0; t < len; ++t) q(i, t) = cand[t] / nrm;
        break;
      }
    }
  }
}

// SVD for rows >= cols.
SvdResult svd_tall(const DenseMatrix& m) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  DenseMatrix w = m.transpose();  // row j = column j of m
  DenseMatrix v = DenseMatrix::identity(cols);
  if (!hestenes_sweeps(w, v)) {
    throw NumericFailure("svd: one-sided Jacobi did not converge in " +
                         std::to_string(kMaxJacobiSweeps) + " sweeps");
  }

  std::vector<double> norms(cols);
  for (std::size_t j = 0; j < cols; ++j) norms[j] = norm2(w.row(j));
  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

  const double largest = cols ? norms[order[0]] : 0.0;
  const double zero_tol = largest * kEps * static_cast<double>(std::max(rows, cols));

  DenseMatrix ut(cols, rows);  // rows are left singular vectors
  DenseMatrix vt(cols, cols);
  std::vector<double> sigma(cols);
  std::vector<bool> missing(cols, false);
  for (std::size_t k = 0; k < cols; ++k) {
    const std::size_t j = order[k];
    const double s = norms[j];
    if (s <= zero_tol || s == 0.0) {
      sigma[k] = 0.0;
      missing[k] = true;
    } else {
      sigma[k] = s;
      for (std::size_t t = 0; t < rows; ++t) ut(k, t) = w(j, t) / s;
    }
    for (std::size_t t = 0; t < cols; ++t) vt(k, t) = v(j, t);
  }
  if (std::any_of(missing.begin(), missing.end(), [](bool b) { return b; })) {
    complete_orthonormal_rows(ut, missing);
  }

  for (std::size_t k = 0; k < cols; ++k) {
    auto urow = ut.row(k);
    auto first = std::find_if(urow.begin(), urow.end(),
                              [](double x) { return std::abs(x) > 1e-300; });
    if (first != urow.end() && *first < 0.0) {
      for (double& x : urow) x = -x;
      for (double& x : vt.row(k)) x = -x;
    }
  }
  return {ut.transpose(), std::move(sigma), std::move(vt)};
}

// MINRES for a symmetric system n·x = g starting from x. Port of the
// Paige-Saunders recurrence without preconditioning. Returns iterations used.
std::size_t minres_symmetric(const DenseMatrix& n, std::span<const double> g,
                             std::vector<double>& x, std::size_t max_it, double rtol) {
  const std::size_t dim = g.size();
  std::vector<double> r1(dim);
  const std::vector<double> nx = matvec(n, x);
  for (std::size_t i = 0; i < dim; ++i) r1[i] = g[i] - nx[i];
  std::vector<double> y = r1;
  const double beta1 = norm2(r1);
  if (beta1 == 0.0) return 0;

  std::vector<double> r2 = r1, v(dim), w(dim, 0.0), w1(dim), w2(dim, 0.0);
  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;
  std::size_t itn = 0;
  while (itn < max_it) {
    ++itn;
    const double s = 1.0 / beta;
    for (std::size_t i = 0; i < dim; ++i) v[i] = s * y[i];
    y = matvec(n, v);
    if (itn >= 2) {
      const double f = beta / oldb;
      for (std::size_t i = 0; i < dim; ++i) y[i] -= f * r1[i];
    }
    const double alfa = dot(v, y);
    for (std::size_t i = 0; i < dim; ++i) y[i] -= (alfa / beta) * r2[i];
    r1.swap(r2);
    r2 = y;
    oldb = beta;
    beta = norm2(y);
    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::max(std::hypot(gbar, beta), kEps);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;
    w1.swap(w2);
    w2.swap(w);
    for (std::size_t i = 0; i < dim; ++i) {
      w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
      x[i] += phi * w[i];
    }
    if (phibar <= rtol * beta1 || beta <= kEps * beta1) break;
  }
  return itn;
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ContractViolation("DenseMatrix: data length " + std::to_string(data_.size()) +
                            " != " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ContractViolation("DenseMatrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> values) {
  DenseMatrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

std::vector<double> DenseMatrix::column(std::size_t j) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

void DenseMatrix::set_column(std::size_t j, std::span<const double> values) {
  if (values.size() != rows_ || j >= cols_) {
    throw ContractViolation("DenseMatrix::set_column: bad column or length");
  }
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

DenseMatrix DenseMatrix::row_block(std::size_t first, std::size_t count) const {
  if (first + count > rows_) throw ContractViolation("row_block: out of range");
  return DenseMatrix(count, cols_,
                     std::vector<double>(data_.begin() + first * cols_,
                                         data_.begin() + (first + count) * cols_));
}

DenseMatrix DenseMatrix::col_block(std::size_t first, std::size_t count) const {
  if (first + count > cols_) throw ContractViolation("col_block: out of range");
  DenseMatrix out(rows_, count);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = (*this)(i, first + j);
  return out;
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator*=(double factor) {
  for (double& x : data_) x *= factor;
  return *this;
}

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
DenseMatrix operator*(double factor, DenseMatrix a) { return a *= factor; }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ContractViolation("matmul: inner dimensions " + std::to_string(a.cols()) +
                            " and " + std::to_string(b.rows()) + " differ");
  }
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto crow = c.row(i);
    for (std::size_t t = 0; t < a.cols(); ++t) {
      const double x = a(i, t);
      if (x == 0.0) continue;
      auto brow = b.row(t);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += x * brow[j];
    }
  }
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw ContractViolation("matmul_tn: row counts differ");
  DenseMatrix c(a.cols(), b.cols());
  for (std::size_t t = 0; t < a.rows(); ++t) {
    auto arow = a.row(t);
    auto brow = b.row(t);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double x = arow[i];
      if (x == 0.0) continue;
      auto crow = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += x * brow[j];
    }
  }
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw ContractViolation("matmul_nt: column counts differ");
  DenseMatrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
  return c;
}

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ContractViolation("matvec: length mismatch");
  std::vector<double> y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

DenseMatrix vstack(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw ContractViolation("vstack: column counts differ");
  std::vector<double> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return DenseMatrix(a.rows() + b.rows(), a.cols(), std::move(data));
}

DenseMatrix hstack(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw ContractViolation("hstack: row counts differ");
  DenseMatrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy(a.row(i).begin(), a.row(i).end(), out.row(i).begin());
    std::copy(b.row(i).begin(), b.row(i).end(), out.row(i).begin() + a.cols());
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) {
  // Scaled accumulation so huge or tiny entries do not overflow.
  double scale = 0.0, ssq = 1.0;
  for (double x : v) {
    if (x == 0.0) continue;
    const double ax = std::abs(x);
    if (scale < ax) {
      ssq = 1.0 + ssq * (scale / ax) * (scale / ax);
      scale = ax;
    } else {
      ssq += (ax / scale) * (ax / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

double frobenius_norm(const DenseMatrix& m) { return norm2(m.data()); }

double spectral_norm(const DenseMatrix& m) {
  if (m.empty()) return 0.0;
  return svd(m).sigma.front();
}

SvdResult svd(const DenseMatrix& m) {
  if (!m.all_finite()) throw ContractViolation("svd: non-finite entry");
  if (m.rows() >= m.cols()) return svd_tall(m);
  SvdResult t = svd_tall(m.transpose());
  // m = (u Σ vt)ᵀ-swap; re-normalize signs on the new left factor.
  SvdResult out{t.vt.transpose(), std::move(t.sigma), t.u.transpose()};
  for (std::size_t k = 0; k < out.sigma.size(); ++k) {
    std::size_t first = 0;
    while (first < out.u.rows() && std::abs(out.u(first, k)) <= 1e-300) ++first;
    if (first < out.u.rows() && out.u(first, k) < 0.0) {
      for (std::size_t i = 0; i < out.u.rows(); ++i) out.u(i, k) = -out.u(i, k);
      for (double& x : out.vt.row(k)) x = -x;
    }
  }
  return out;
}

SymmetricEigen symmetric_eigen(const DenseMatrix& m) {
  if (m.rows() != m.cols()) throw ContractViolation("symmetric_eigen: not square");
  const std::size_t n = m.rows();
  DenseMatrix a = m;
  DenseMatrix v = DenseMatrix::identity(n);
  for (std::size_t sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
    double off = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    if (off <= kEps * kEps * total || off == 0.0) {
      SymmetricEigen out{std::vector<double>(n), std::move(v)};
      for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
      return out;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t =
            std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  throw NumericFailure("symmetric_eigen: Jacobi sweeps did not converge");
}

RangeBasis orthonormal_range(const DenseMatrix& y, double rel_tol) {
  RangeBasis out;
  if (y.cols() == 0 || y.rows() == 0) {
    out.basis = DenseMatrix(y.rows(), 0);
    out.rank_deficient = y.cols() > 0;
    return out;
  }
  const SvdResult f = svd(y);
  const double cutoff = rel_tol * f.sigma.front();
  std::size_t rank = 0;
  while (rank < f.sigma.size() && f.sigma[rank] > cutoff && f.sigma[rank] > 0.0) ++rank;
  out.basis = f.u.col_block(0, rank);
  out.rank = rank;
  out.rank_deficient = rank < y.cols();
  return out;
}

MinresResult minres_solve(const DenseMatrix& coeff, const DenseMatrix& rhs,
                          const MinresOptions& options) {
  const std::size_t k = coeff.rows();
  const std::size_t ell = coeff.cols();
  if (rhs.cols() != ell) {
    throw ContractViolation("minres_solve: rhs has " + std::to_string(rhs.cols()) +
                            " columns, coeff has " + std::to_string(ell));
  }
  if (ell < k) throw ContractViolation("minres_solve: coeff must be wide (ℓ ≥ k)");
  if (!coeff.all_finite() || !rhs.all_finite()) {
    throw ContractViolation("minres_solve: non-finite input");
  }

  const DenseMatrix normal = matmul_nt(coeff, coeff);   // k×k
  const DenseMatrix projected = matmul_nt(rhs, coeff);  // q×k, row i = coeff·rhs_i
  const std::size_t cap = options.max_iterations ? options.max_iterations : 10 * k;

  MinresResult result;
  result.solution = DenseMatrix(rhs.rows(), k);
  for (std::size_t i = 0; i < rhs.rows(); ++i) {
    std::vector<double> x(k, 0.0);
    std::size_t used = 0;
    double prev = std::numeric_limits<double>::infinity();
    while (used < cap) {
      used += std::max<std::size_t>(
          1, minres_symmetric(normal, projected.row(i), x, std::min(cap - used, k + 1), 0.0));
      const std::vector<double> nx = matvec(normal, x);
      std::vector<double> gap(k);
      for (std::size_t t = 0; t < k; ++t) gap[t] = projected(i, t) - nx[t];
      const double g = norm2(gap);
      if (g == 0.0 || g >= 0.5 * prev) break;
      prev = g;
    }
    result.iterations = std::max(result.iterations, used);
    std::copy(x.begin(), x.end(), result.solution.row(i).begin());
  }

  DenseMatrix resid = matmul(result.solution, coeff);
  resid -= rhs;
  result.residual = frobenius_norm(resid);
  result.converged = result.residual <= options.tol * frobenius_norm(rhs);

  const SvdResult f = svd(coeff);
  if (k > 0 && (f.sigma.front() == 0.0 || f.sigma.back() <= options.rank_tol * f.sigma.front())) {
    throw IllPosedSystem("minres_solve: coefficient matrix is rank deficient (σ_min/σ_max = " +
                             std::to_string(f.sigma.front() ? f.sigma.back() / f.sigma.front()
                                                            : 0.0) +
                             ")",
                         result.residual);
  }
  return result;
}

}  // namespace dpsk
