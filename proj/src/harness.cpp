#include "dpsk/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <string>
#include <thread>

#include "dpsk/errors.hpp"
#include "dpsk/sketch.hpp"

namespace dpsk {
namespace {

// Key domains so test data never reuses a sketcher's stream.
constexpr std::uint64_t kDataDomain = 0x6a09e667f3bcc909ULL;
constexpr std::uint64_t kMonteCarloDomain = 0xbb67ae8584caa73bULL;
constexpr std::uint64_t kPrivacyDomain = 0x3c6ef372fe94f82bULL;

std::uint64_t domain_seed(std::uint64_t domain, std::uint64_t seed) {
  return domain ^ (seed * 0x9e3779b97f4a7c15ULL);
}

double vector_rel_diff(std::span<const double> got, std::span<const double> want) {
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    diff += (got[i] - want[i]) * (got[i] - want[i]);
    norm += want[i] * want[i];
  }
  return norm == 0.0 ? std::sqrt(diff) : std::sqrt(diff / norm);
}

double matrix_rel_diff(const DenseMatrix& got, const DenseMatrix& want) {
  return vector_rel_diff(got.data(), want.data());
}

std::vector<double> sigma_of(const DenseMatrix& m) { return svd(m).sigma; }

// Rate check: pass when violations/trials ≤ allowed (+ 3σ slack when requested).
void settle_rate(BoundReport& r, bool with_slack) {
  r.slack = with_slack ? binomial_slack(r.allowed, r.trials) : 0.0;
  const double rate = r.trials ? static_cast<double>(r.violations) / static_cast<double>(r.trials) : 0.0;
  r.pass = r.trials > 0 && rate <= r.allowed + r.slack;
}

// Statistic check: one aggregate violation when it misses.
void settle_statistic(BoundReport& r, bool ok) {
  r.violations = ok ? 0 : 1;
  r.allowed = 0.0;
  r.slack = 0.0;
  r.pass = ok;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = first + i;
  return seeds;
}

DenseMatrix random_orthonormal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  return svd(gaussian_test_matrix(rows, cols, seed)).u;
}

BoundReport negative_control(BoundReport inner) {
  inner.check += "_negative_control";
  inner.pass = !inner.pass;
  return inner;
}

}  // namespace

nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j;
  j["check"] = r.check;
  j["trials"] = r.trials;
  j["violations"] = r.violations;
  j["allowed"] = r.allowed;
  j["slack"] = r.slack;
  j["pass"] = r.pass;
  j["seeds"] = r.seeds;
  if (!r.observed_lhs.empty()) j["lhs"] = r.observed_lhs;
  if (!r.bound_rhs.empty()) j["rhs"] = r.bound_rhs;
  if (r.statistic) j["statistic"] = *r.statistic;
  if (r.target) j["target"] = *r.target;
  return j;
}

double binomial_slack(double rate, std::size_t trials) {
  if (trials == 0) return 0.0;
  return 3.0 * std::sqrt(rate * (1.0 - rate) / static_cast<double>(trials));
}

std::size_t harness_threads() {
  if (const char* env = std::getenv("DPSK_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(harness_threads(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// Oracles -------------------------------------------------------------------

DenseMatrix exact_truncated_svd(const DenseMatrix& a, std::size_t k) {
  if (k > std::min(a.rows(), a.cols())) {
    throw ContractViolation("exact_truncated_svd: k exceeds the matrix dimensions");
  }
  const SvdResult f = svd(a);
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double ui = f.sigma[t] * f.u(i, t);
      for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) += ui * f.vt(t, j);
    }
  return out;
}

std::vector<double> exact_lsq(const DenseMatrix& a, std::span<const double> b) {
  if (b.size() != a.rows()) throw ContractViolation("exact_lsq: dimension mismatch");
  const SvdResult f = svd(a);
  std::vector<double> x(a.cols(), 0.0);
  if (f.sigma.empty() || f.sigma.front() == 0.0) return x;
  const double cutoff = 1e-14 * f.sigma.front() * static_cast<double>(std::max(a.rows(), a.cols()));
  for (std::size_t t = 0; t < f.sigma.size(); ++t) {
    if (f.sigma[t] <= cutoff) continue;
    double proj = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) proj += f.u(i, t) * b[i];
    proj /= f.sigma[t];
    for (std::size_t j = 0; j < a.cols(); ++j) x[j] += f.vt(t, j) * proj;
  }
  return x;
}

DenseMatrix exact_product(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw ContractViolation("exact_product: row counts differ");
  return matmul_tn(a, b);
}

DenseMatrix range_finder_oracle(const DenseMatrix& a, const DenseMatrix& omega) {
  const DenseMatrix q = orthonormal_range(matmul(a, omega)).basis;
  return matmul(q, matmul_tn(q, a));
}

// Test data -----------------------------------------------------------------

DenseMatrix gaussian_test_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                 double scale) {
  DenseMatrix m(rows, cols);
  const std::uint64_t key = domain_seed(kDataDomain, seed);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * generate_normal(key, i);
  return m;
}

DenseMatrix planted_low_rank(std::size_t n, std::size_t d, std::size_t k, std::uint64_t seed) {
  const DenseMatrix u = random_orthonormal(n, k, 3 * seed);
  const DenseMatrix v = random_orthonormal(d, k, 3 * seed + 1);
  DenseMatrix a = gaussian_test_matrix(n, d, 3 * seed + 2);
  for (std::size_t t = 0; t < k; ++t) {
    const double sv = 100.0 * static_cast<double>(k - t);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) a(i, j) += sv * u(i, t) * v(j, t);
  }
  return a;
}

// Random-matrix moments -------------------------------------------------------

BoundReport mc_pseudoinverse_frobenius(std::size_t k, std::size_t p, std::size_t trials,
                                       std::uint64_t seed, double tolerance) {
  if (p < 2) throw ParameterDomainError("mc_pseudoinverse_frobenius: p must be >= 2");
  if (k == 0 || trials == 0) throw ParameterDomainError("mc_pseudoinverse_frobenius: empty run");
  std::vector<double> values(trials);
  parallel_for(trials, [&](std::size_t t) {
    const auto g = GaussianSketcher(domain_seed(kMonteCarloDomain, seed + t), k, k + p, false).omega();
    double sum = 0.0;
    for (double s : sigma_of(g)) sum += 1.0 / (s * s);
    values[t] = sum;
  });
  BoundReport r;
  r.check = "pseudoinverse_frobenius";
  r.trials = trials;
  r.seeds = {seed};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(trials);
  const double target = static_cast<double>(k) / static_cast<double>(p - 1);
  r.statistic = mean;
  r.target = target;
  settle_statistic(r, std::abs(mean - target) <= tolerance * target);
  return r;
}

BoundReport mc_pseudoinverse_spectral(std::size_t k, std::size_t p, std::size_t trials,
                                      std::uint64_t seed) {
  if (p < 1 || k == 0 || trials == 0) throw ParameterDomainError("mc_pseudoinverse_spectral: bad shape");
  std::vector<double> values(trials);
  parallel_for(trials, [&](std::size_t t) {
    const auto g = GaussianSketcher(domain_seed(kMonteCarloDomain, seed + t), k, k + p, false).omega();
    values[t] = 1.0 / sigma_of(g).back();
  });
  BoundReport r;
  r.check = "pseudoinverse_spectral";
  r.trials = trials;
  r.seeds = {seed};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(trials);
  const double bound = std::numbers::e * std::sqrt(static_cast<double>(k + p)) / static_cast<double>(p);
  r.statistic = mean;
  r.target = bound;
  settle_statistic(r, mean <= bound);
  return r;
}

BoundReport mc_jl(std::size_t m_vectors, std::size_t r, double alpha, std::size_t trials,
                  std::size_t dim, std::uint64_t seed, double vector_scale) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterDomainError("mc_jl: alpha must lie in (0, 1)");
  if (r == 0 || m_vectors == 0 || trials == 0 || dim == 0) throw ParameterDomainError("mc_jl: empty run");
  const DenseMatrix xs = gaussian_test_matrix(m_vectors, dim, seed, vector_scale);
  std::vector<std::size_t> fails(trials, 0);
  parallel_for(trials, [&](std::size_t t) {
    const GaussianSketcher sk(domain_seed(kMonteCarloDomain, seed + t), r, dim, true);
    for (std::size_t v = 0; v < m_vectors; ++v) {
      const auto x = xs.row(v);
      const double before = dot(x, x);
      const auto y = sk.psg1(x);
      const double after = dot(y, y) / static_cast<double>(r);
      if (std::abs(after - before) > alpha * before) ++fails[t];
    }
  });
  BoundReport rep;
  rep.check = "johnson_lindenstrauss";
  rep.trials = trials * m_vectors;
  for (std::size_t f : fails) rep.violations += f;
  rep.allowed = std::min(1.0, 2.0 * std::exp(-alpha * alpha * static_cast<double>(r) / 8.0));
  rep.seeds = {seed};
  settle_rate(rep, true);
  return rep;
}

BoundReport mc_inner_product(std::size_t r, double alpha, std::size_t trials, std::size_t dim,
                             std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterDomainError("mc_inner_product: alpha must lie in (0, 1)");
  DenseMatrix uv = gaussian_test_matrix(2, dim, seed);
  for (std::size_t i = 0; i < 2; ++i) {
    const double norm = norm2(uv.row(i));
    for (double& x : uv.row(i)) x /= norm;
  }
  const double exact = dot(uv.row(0), uv.row(1));
  std::vector<char> fail(trials, 0);
  parallel_for(trials, [&](std::size_t t) {
    const GaussianSketcher sk(domain_seed(kMonteCarloDomain, seed + t), r, dim, true);
    const auto a = sk.psg1(uv.row(0));
    const auto b = sk.psg1(uv.row(1));
    fail[t] = std::abs(dot(a, b) / static_cast<double>(r) - exact) > alpha;
  });
  BoundReport rep;
  rep.check = "inner_product_preservation";
  rep.trials = trials;
  for (char f : fail) rep.violations += f ? 1 : 0;
  rep.allowed = std::min(1.0, 2.0 * std::exp(-static_cast<double>(r) * alpha * alpha / 8.0));
  rep.seeds = {seed};
  settle_rate(rep, true);
  return rep;
}

BoundReport mc_subspace_embedding(std::size_t d, std::size_t height, std::size_t r, double alpha,
                                  double beta, std::size_t trials, std::uint64_t seed) {
  const DenseMatrix u = random_orthonormal(height, d, seed);
  std::vector<char> fail(trials, 0);
  parallel_for(trials, [&](std::size_t t) {
    const GaussianSketcher sk(domain_seed(kMonteCarloDomain, seed + t), r, height, true);
    DenseMatrix gram = matmul(sk.omega(), u);
    gram = matmul_tn(gram, gram);
    gram *= 1.0 / static_cast<double>(r);
    gram -= DenseMatrix::identity(d);
    fail[t] = spectral_norm(gram) > alpha;
  });
  BoundReport rep;
  rep.check = "subspace_embedding";
  rep.trials = trials;
  for (char f : fail) rep.violations += f ? 1 : 0;
  rep.allowed = beta;
  rep.seeds = {seed};
  settle_rate(rep, true);
  return rep;
}

// Privacy -------------------------------------------------------------------

BoundReport dp_density_ratio_check(std::size_t n, std::size_t r, const PrivacyBudget& budget,
                                   std::size_t samples, const DensityRatioOptions& options) {
  if (n == 0 || n > 8) throw ParameterDomainError("dp_density_ratio_check: n must lie in [1, 8]");
  if (samples == 0) throw ParameterDomainError("dp_density_ratio_check: no samples");
  const double threshold = guard::sigma_min_psg1(budget, r);
  const double smin = options.scale * threshold;

  const DenseMatrix u = random_orthonormal(n, n, domain_seed(kPrivacyDomain, options.seed));
  const DenseMatrix v = random_orthonormal(n, n, domain_seed(kPrivacyDomain, options.seed + 1));
  DenseMatrix a(n, n), neighbour(n, n);
  for (std::size_t t = 0; t < n; ++t) {
    const double sv = smin * (1.0 + 0.5 * static_cast<double>(t));
    const double shift = (options.identical || t != 0) ? 0.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        a(i, j) += sv * u(i, t) * v(j, t);
        neighbour(i, j) += (sv - shift) * u(i, t) * v(j, t);
      }
  }

  const SvdResult fa = svd(a);
  const SvdResult fn = svd(neighbour);
  if (options.enforce_guard && (fa.sigma.back() < threshold || fn.sigma.back() < threshold)) {
    throw ContractViolation("dp_density_ratio_check: input spectrum below the psg1 threshold");
  }
  // (AᵀA)⁻¹ = V Σ⁻² Vᵀ and log det(AᵀA) = 2 Σ log σ.
  auto inverse_gram = [n](const SvdResult& f) {
    DenseMatrix g(n, n);
    for (std::size_t t = 0; t < n; ++t) {
      const double w = 1.0 / (f.sigma[t] * f.sigma[t]);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) g(i, j) += w * f.vt(t, i) * f.vt(t, j);
    }
    return g;
  };
  auto logdet = [](const SvdResult& f) {
    double s = 0.0;
    for (double x : f.sigma) s += 2.0 * std::log(x);
    return s;
  };
  const DenseMatrix diff = inverse_gram(fa) - inverse_gram(fn);
  const double constant = -0.5 * (logdet(fa) - logdet(fn));
  const double eps0 = budget.eps / std::sqrt(4.0 * static_cast<double>(r) * std::log(2.0 / budget.delta));

  const std::uint64_t key = domain_seed(kPrivacyDomain, options.seed + 2);
  constexpr std::size_t kBlock = 4096;
  const std::size_t blocks = (samples + kBlock - 1) / kBlock;
  std::vector<std::size_t> block_fail(blocks, 0);
  std::vector<double> block_max(blocks, 0.0);
  parallel_for(blocks, [&](std::size_t blk) {
    std::vector<double> g(n), x(n);
    const std::size_t end = std::min(samples, (blk + 1) * kBlock);
    for (std::size_t s = blk * kBlock; s < end; ++s) {
      for (std::size_t i = 0; i < n; ++i) g[i] = generate_normal(key, s * n + i);
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += g[i] * a(i, j);
        x[j] = acc;
      }
      double quad = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) quad += x[i] * diff(i, j) * x[j];
      const double loss = std::abs(constant - 0.5 * quad);
      block_max[blk] = std::max(block_max[blk], loss);
      if (loss > eps0) ++block_fail[blk];
    }
  });

  BoundReport rep;
  rep.check = "dp_density_ratio_psg1";
  rep.trials = samples;
  for (std::size_t f : block_fail) rep.violations += f;
  rep.allowed = budget.delta / (2.0 * static_cast<double>(r));
  rep.seeds = {options.seed};
  rep.statistic = *std::max_element(block_max.begin(), block_max.end());
  rep.target = eps0;
  settle_rate(rep, true);
  return rep;
}

BoundReport guard_check_lra(std::size_t instances, std::uint64_t seed) {
  BoundReport rep;
  rep.check = "guard_lra_lift";
  rep.trials = instances;
  rep.seeds = seed_range(seed, instances);
  std::vector<char> fail(instances, 0);
  std::vector<double> observed(instances), required(instances);
  parallel_for(instances, [&](std::size_t t) {
    const std::uint64_t s = seed + t;
    const std::size_t n = 16 + s % 10;
    const std::size_t d = n + s % 7;
    const DenseMatrix a = gaussian_test_matrix(n, d, 7000 + s, std::pow(10.0, static_cast<double>(s % 5)));
    LraConfig c;
    c.n = n;
    c.d = d;
    c.k = 4 + s % 3;
    c.budget = {0.5 + static_cast<double>(s % 4), 0.001 * static_cast<double>(1 + s % 9)};
    c.seed = s;
    const LraState state(c);
    const double w = state.w();
    const DenseMatrix lifted = hstack(w * DenseMatrix::identity(n), a);
    const GuardReport g = guard::verify_spectral_guard(lifted, state.guard_threshold());
    observed[t] = g.observed_sigma_min;
    required[t] = g.required_sigma_min;
    const auto got = sigma_of(lifted);
    const auto base = sigma_of(a);
    bool ok = g.passed;
    for (std::size_t i = 0; i < n; ++i) {
      const double want = std::sqrt(w * w + base[i] * base[i]);
      if (std::abs(got[i] - want) > 1e-8 * want) ok = false;
    }
    fail[t] = !ok;
  });
  for (char f : fail) rep.violations += f ? 1 : 0;
  rep.observed_lhs = observed;
  rep.bound_rhs = required;
  settle_rate(rep, false);
  return rep;
}

BoundReport guard_check_matprod(std::size_t instances, std::uint64_t seed) {
  BoundReport rep;
  rep.check = "guard_matprod_lift";
  rep.trials = instances;
  rep.seeds = seed_range(seed, instances);
  std::vector<char> fail(instances, 0);
  std::vector<double> observed(instances), required(instances);
  parallel_for(instances, [&](std::size_t t) {
    const std::uint64_t s = seed + t;
    MatProdConfig c;
    c.n = 10 + (s * 37) % 191;  // up to 200
    c.d1 = 1 + s % 6;
    c.d2 = 1 + (s / 6) % 6;
    c.budget = {0.5 + static_cast<double>(s % 4), 0.001 * static_cast<double>(1 + s % 9)};
    c.accuracy = {0.3 + 0.1 * static_cast<double>(s % 4), 0.1};
    c.seed = s;
    const MatProdState state(c);
    const double need = guard::sigma_min_psg1(c.budget, state.r());
    bool ok = true;
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t which = 0; which < 2; ++which) {
      const std::size_t cols = which ? c.d2 : c.d1;
      const DenseMatrix a = gaussian_test_matrix(c.n, cols, 8000 + 2 * s + which,
                                                 std::pow(10.0, static_cast<double>(s % 4)));
      const GuardReport g = guard::verify_spectral_guard(lifted_matrix(a, state.s(), state.layout()), need);
      ok = ok && g.passed && g.observed_sigma_min >= state.s() * (1.0 - 1e-12);
      worst = std::min(worst, g.observed_sigma_min);
    }
    observed[t] = worst;
    required[t] = need;
    fail[t] = !ok;
  });
  for (char f : fail) rep.violations += f ? 1 : 0;
  rep.observed_lhs = observed;
  rep.bound_rhs = required;
  settle_rate(rep, false);
  return rep;
}

BoundReport guard_check_regress(std::size_t instances, std::uint64_t seed) {
  BoundReport rep;
  rep.check = "guard_regress_lift";
  rep.trials = instances;
  rep.seeds = seed_range(seed, instances);
  std::vector<char> fail(instances, 0);
  std::vector<double> observed(instances), required(instances);
  parallel_for(instances, [&](std::size_t t) {
    const std::uint64_t s = seed + t;
    RegressConfig c;
    c.n = 10 + (s * 53) % 191;
    c.d = 1 + s % 8;
    c.budget = {0.5 + static_cast<double>(s % 4), 0.001 * static_cast<double>(1 + s % 9)};
    c.accuracy = {0.5, 0.1 + 0.05 * static_cast<double>(s % 3)};
    c.seed = s;
    const RegressState state(c);
    const DenseMatrix a = gaussian_test_matrix(c.n, c.d, 9000 + s, std::pow(10.0, static_cast<double>(s % 4)));
    const double need = guard::sigma_min_psg1(c.budget, state.r());
    const GuardReport g = guard::verify_spectral_guard(lifted_matrix(a, state.s(), state.layout()), need);
    observed[t] = g.observed_sigma_min;
    required[t] = need;
    fail[t] = !(g.passed && g.observed_sigma_min >= state.s() * (1.0 - 1e-12));
  });
  for (char f : fail) rep.violations += f ? 1 : 0;
  rep.observed_lhs = observed;
  rep.bound_rhs = required;
  settle_rate(rep, false);
  return rep;
}

// Sketch algebra and space ----------------------------------------------------

BoundReport sketch_algebra_check(std::size_t cases, std::uint64_t seed, double tol) {
  BoundReport rep;
  rep.check = "sketch_algebra";
  rep.trials = cases;
  rep.seeds = seed_range(seed, cases);
  std::vector<char> fail(cases, 0);
  parallel_for(cases, [&](std::size_t t) {
    const std::uint64_t s = seed + t;
    const std::size_t r = 1 + s % 12;
    const std::size_t m = 1 + (s * 7) % 40;
    const std::size_t cols = 1 + s % 4;
    const GaussianSketcher stored(s, r, m, true);
    const GaussianSketcher lazy(s, r, m, false);
    const GaussianSketcher again(s, r, m, true);
    const DenseMatrix data = gaussian_test_matrix(m, cols + 2, 50'000 + s);
    const auto u = data.column(0);
    const auto v = data.column(1);
    const double alpha = 1.5 - static_cast<double>(s % 5), beta = 0.25 + static_cast<double>(s % 3);
    bool ok = true;

    // Linearity.
    std::vector<double> combo(m);
    for (std::size_t i = 0; i < m; ++i) combo[i] = alpha * u[i] + beta * v[i];
    const auto pu = stored.psg1(u), pv = stored.psg1(v), pc = stored.psg1(combo);
    std::vector<double> expect(r);
    for (std::size_t i = 0; i < r; ++i) expect[i] = alpha * pu[i] + beta * pv[i];
    ok = ok && vector_rel_diff(pc, expect) <= tol;
    // Determinism and stored/lazy agreement, bit for bit.
    ok = ok && stored.psg1(u) == again.psg1(u) && lazy.psg1(u) == pu && lazy.psg2(v) == stored.psg2(v);
    // psg2 = Ωᵀ∘psg1 and against the dense product.
    ok = ok && stored.psg2(u) == stored.apply_transpose(pu);
    const DenseMatrix om = stored.omega();
    const auto dense = matvec(om.transpose(), matvec(om, u));
    ok = ok && vector_rel_diff(stored.psg2(u), dense) <= tol;

    // Shard merge and turnstile streaming against one batch stream.
    for (SketchKind kind : {SketchKind::psg1, SketchKind::psg2}) {
      Sketch whole(kind, stored, cols), left(kind, lazy, cols), right(kind, stored, cols),
          entries(kind, lazy, cols);
      for (std::size_t c = 0; c < cols; ++c) {
        const auto col = data.column(2 + c);
        whole.update_column(stored, c, col);
        std::vector<double> first(m, 0.0), second(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) (i % 2 ? first : second)[i] = col[i];
        left.update_column(lazy, c, first);
        right.update_column(stored, c, second);
        for (std::size_t i = 0; i < m; ++i) entries.update_entry(lazy, c, i, col[i]);
      }
      ok = ok && matrix_rel_diff(merge(left, right).data(), whole.data()) <= tol;
      ok = ok && matrix_rel_diff(entries.data(), whole.data()) <= tol;
    }
    fail[t] = !ok;
  });
  for (char f : fail) rep.violations += f ? 1 : 0;
  settle_rate(rep, false);
  return rep;
}

BoundReport space_accounting_check() {
  BoundReport rep;
  rep.check = "space_accounting";
  for (std::size_t n : {12u, 20u, 40u}) {
    for (std::size_t k : {1u, 2u, 3u}) {
      for (bool sym : {true, false}) {
        LraConfig c;
        c.n = n;
        c.d = n;
        c.k = k;
        c.p = k + 1;
        c.budget = {1.0, 0.01};
        c.symmetric = sym;
        c.halve_budget = false;
        c.bypass_guard = true;
        const LraState s(c);
        const std::size_t width = c.sketch_width();
        const std::size_t want = sym ? 2 * n * width + n * width
                                     : 2 * n * width + (n + c.d) * width;
        rep.observed_lhs.push_back(static_cast<double>(s.retained_entries()));
        rep.bound_rhs.push_back(static_cast<double>(want));
        ++rep.trials;
        if (s.retained_entries() != want) ++rep.violations;
      }
    }
    for (std::size_t d1 : {1u, 5u}) {
      for (std::size_t d2 : {2u, 7u}) {
        MatProdConfig c;
        c.n = n;
        c.d1 = d1;
        c.d2 = d2;
        const MatProdState s(c);
        const std::size_t want = s.r() * (d1 + d2);
        rep.observed_lhs.push_back(static_cast<double>(s.retained_entries()));
        rep.bound_rhs.push_back(static_cast<double>(want));
        ++rep.trials;
        if (s.retained_entries() != want) ++rep.violations;
      }
    }
    for (std::size_t d : {1u, 4u, 10u}) {
      RegressConfig c;
      c.n = n;
      c.d = d;
      const RegressState s(c);
      const std::size_t want = s.r() * d;
      rep.observed_lhs.push_back(static_cast<double>(s.retained_entries()));
      rep.bound_rhs.push_back(static_cast<double>(want));
      ++rep.trials;
      if (s.retained_entries() != want) ++rep.violations;
    }
  }
  settle_rate(rep, false);
  return rep;
}

// Error bounds ---------------------------------------------------------------

namespace {

DenseMatrix lra_input(const LraConfig& c, std::uint64_t seed) {
  DenseMatrix a = planted_low_rank(c.n, c.d, c.k, 20'000 + seed);
  if (c.symmetric) a = 0.5 * (a + a.transpose());
  return a;
}

DenseMatrix run_lra(const LraConfig& c, const DenseMatrix& a) {
  LraState state(c);
  for (std::size_t i = 0; i < a.rows(); ++i) state.ingest_row(i, a.row(i));
  return reconstruct(state.finalize(), c);
}

}  // namespace

LraBoundReports bound_check_lra(const LraConfig& base, std::size_t trials, double error_inflation) {
  LraBoundReports out;
  out.frobenius.check = "lra_frobenius_bound";
  out.spectral.check = "lra_spectral_bound";
  for (BoundReport* r : {&out.frobenius, &out.spectral}) {
    r->trials = trials;
    r->seeds = seed_range(base.seed, trials);
    r->allowed = 0.1;
    r->observed_lhs.assign(trials, 0.0);
    r->bound_rhs.assign(trials, 0.0);
  }
  const PrivacyBudget b = base.effective_budget();
  const double k = static_cast<double>(base.k);
  const double p = static_cast<double>(base.oversampling());
  const double nd = static_cast<double>(base.n + base.d);
  const double lk = std::log(k / b.delta);
  parallel_for(trials, [&](std::size_t t) {
    LraConfig c = base;
    c.seed = base.seed + t;
    const DenseMatrix a = lra_input(c, c.seed);
    const DenseMatrix approx = run_lra(c, a);
    const DenseMatrix residual = a - approx;

    const DenseMatrix best = exact_truncated_svd(a, base.k);
    const double optimum = frobenius_norm(a - best);
    const auto sigma = sigma_of(a);
    double tail2 = 0.0;
    for (std::size_t j = base.k; j < sigma.size(); ++j) tail2 += sigma[j] * sigma[j];
    const double next = base.k < sigma.size() ? sigma[base.k] : 0.0;
    const double mult = std::sqrt(1.0 + k / (p - 1.0));

    out.frobenius.observed_lhs[t] = error_inflation * frobenius_norm(residual);
    out.frobenius.bound_rhs[t] = mult * optimum + 2.0 * k / b.eps * std::sqrt(nd * lk / p);
    out.spectral.observed_lhs[t] = error_inflation * spectral_norm(residual);
    out.spectral.bound_rhs[t] = mult * next + std::numbers::e * std::sqrt((k + p) * tail2) / p +
                                2.0 * std::sqrt(k * nd * lk) / b.eps;
  });
  for (BoundReport* r : {&out.frobenius, &out.spectral}) {
    for (std::size_t t = 0; t < trials; ++t)
      if (r->observed_lhs[t] > r->bound_rhs[t]) ++r->violations;
    settle_rate(*r, false);
  }
  return out;
}

BoundReport lra_nonprivate_check(const LraConfig& base, std::size_t trials, double factor) {
  BoundReport rep;
  rep.check = "lra_nonprivate_range_finder";
  rep.trials = trials;
  rep.seeds = seed_range(base.seed, trials);
  rep.observed_lhs.assign(trials, 0.0);
  rep.bound_rhs.assign(trials, 0.0);
  parallel_for(trials, [&](std::size_t t) {
    LraConfig c = base;
    c.seed = base.seed + t;
    c.w_override = 0.0;
    c.bypass_guard = true;
    const DenseMatrix a = lra_input(c, c.seed);
    LraState state(c);
    for (std::size_t i = 0; i < a.rows(); ++i) state.ingest_row(i, a.row(i));
    DenseMatrix m = a, omega = state.omega2();
    if (!c.symmetric) {
      m = vstack(hstack(DenseMatrix(c.n, c.n), a), hstack(a.transpose(), DenseMatrix(c.d, c.d)));
      omega = state.omega();
    }
    const DenseMatrix psi = state.range_basis();
    rep.observed_lhs[t] = frobenius_norm(m - matmul(psi, matmul_tn(psi, m)));
    rep.bound_rhs[t] = factor * frobenius_norm(m - range_finder_oracle(m, omega));
  });
  for (std::size_t t = 0; t < trials; ++t)
    if (rep.observed_lhs[t] > rep.bound_rhs[t]) ++rep.violations;
  settle_rate(rep, false);
  return rep;
}

BoundReport bound_check_matprod(const MatProdConfig& base, std::size_t trials, double error_inflation) {
  BoundReport rep;
  rep.check = "matprod_bound";
  rep.trials = trials;
  rep.seeds = seed_range(base.seed, trials);
  rep.allowed = base.accuracy.beta;
  rep.observed_lhs.assign(trials, 0.0);
  rep.bound_rhs.assign(trials, 0.0);
  parallel_for(trials, [&](std::size_t t) {
    MatProdConfig c = base;
    c.seed = base.seed + t;
    const DenseMatrix a = gaussian_test_matrix(c.n, c.d1, 30'000 + 2 * c.seed);
    const DenseMatrix b = gaussian_test_matrix(c.n, c.d2, 30'001 + 2 * c.seed);
    MatProdState state(c);
    for (std::size_t j = 0; j < c.d1; ++j) state.ingest_a_column(j, a.column(j));
    for (std::size_t j = 0; j < c.d2; ++j) state.ingest_b_column(j, b.column(j));
    const double alpha = c.accuracy.alpha;
    rep.observed_lhs[t] = error_inflation * frobenius_norm(exact_product(a, b) - state.product_query());
    rep.bound_rhs[t] = alpha * frobenius_norm(a) * frobenius_norm(b) +
                       state.s() * state.s() * std::sqrt(static_cast<double>(c.n)) * alpha;
  });
  for (std::size_t t = 0; t < trials; ++t)
    if (rep.observed_lhs[t] > rep.bound_rhs[t]) ++rep.violations;
  settle_rate(rep, true);
  return rep;
}

BoundReport mc_matprod_unbiased(const MatProdConfig& base, std::size_t trials, bool debias) {
  const DenseMatrix a = gaussian_test_matrix(base.n, base.d1, 40'000 + base.seed, 30.0);
  const DenseMatrix b = gaussian_test_matrix(base.n, base.d2, 40'001 + base.seed, 30.0);
  const DenseMatrix truth = exact_product(a, b);
  std::vector<DenseMatrix> estimates(trials);
  parallel_for(trials, [&](std::size_t t) {
    MatProdConfig c = base;
    c.seed = base.seed + t;
    MatProdState state(c);
    for (std::size_t j = 0; j < c.d1; ++j) state.ingest_a_column(j, a.column(j));
    for (std::size_t j = 0; j < c.d2; ++j) state.ingest_b_column(j, b.column(j));
    DenseMatrix est = state.product_query();
    if (!debias)
      for (std::size_t i = 0; i < std::min(c.d1, c.d2); ++i) est(i, i) += state.s() * state.s();
    estimates[t] = std::move(est);
  });
  // Ordered reduction keeps the result independent of the worker count.
  const double n = static_cast<double>(trials);
  double worst = 0.0;
  for (std::size_t e = 0; e < truth.size(); ++e) {
    double mean = 0.0;
    for (const auto& est : estimates) mean += est.data()[e];
    mean /= n;
    double var = 0.0;
    for (const auto& est : estimates) var += (est.data()[e] - mean) * (est.data()[e] - mean);
    var /= (n - 1.0);
    const double z = std::abs(mean - truth.data()[e]) / std::sqrt(var / n);
    worst = std::max(worst, z);
  }
  BoundReport rep;
  rep.check = debias ? "matprod_unbiased" : "matprod_unbiased_without_debias";
  rep.trials = trials;
  rep.seeds = {base.seed};
  rep.statistic = worst;
  rep.target = 3.0;
  settle_statistic(rep, worst <= 3.0);
  return rep;
}

BoundReport bound_check_regress(const RegressConfig& base, std::size_t trials, double error_inflation) {
  BoundReport rep;
  rep.check = "regress_bound";
  rep.trials = trials;
  rep.seeds = seed_range(base.seed, trials);
  rep.allowed = base.accuracy.beta;
  rep.observed_lhs.assign(trials, 0.0);
  rep.bound_rhs.assign(trials, 0.0);
  parallel_for(trials, [&](std::size_t t) {
    RegressConfig c = base;
    c.seed = base.seed + t;
    const DenseMatrix a = gaussian_test_matrix(c.n, c.d, 50'000 + 2 * c.seed);
    const DenseMatrix bm = gaussian_test_matrix(c.n, 1, 50'001 + 2 * c.seed);
    const std::vector<double> b(bm.data().begin(), bm.data().end());
    RegressState state(c);
    for (std::size_t j = 0; j < c.d; ++j) state.ingest_column(j, a.column(j));
    const auto x = state.query(b);
    auto residual = [&](std::span<const double> sol) {
      const auto ax = matvec(a, sol);
      double s = 0.0;
      for (std::size_t i = 0; i < b.size(); ++i) s += (ax[i] - b[i]) * (ax[i] - b[i]);
      return std::sqrt(s);
    };
    const double alpha = c.accuracy.alpha;
    rep.observed_lhs[t] = error_inflation * residual(x);
    rep.bound_rhs[t] = (1.0 + alpha) * residual(exact_lsq(a, b)) +
                       state.s() * state.s() * std::sqrt(static_cast<double>(c.n)) * alpha;
  });
  for (std::size_t t = 0; t < trials; ++t)
    if (rep.observed_lhs[t] > rep.bound_rhs[t]) ++rep.violations;
  settle_rate(rep, true);
  return rep;
}

BoundReport ridge_equivalence_check(std::size_t n, std::size_t d, std::size_t instances,
                                    std::uint64_t seed, double tol) {
  BoundReport rep;
  rep.check = "regress_ridge_equivalence";
  rep.trials = instances;
  rep.seeds = seed_range(seed, instances);
  rep.observed_lhs.assign(instances, 0.0);
  parallel_for(instances, [&](std::size_t t) {
    RegressConfig c;
    c.n = n;
    c.d = d;
    c.seed = seed + t;
    const RegressState state(c);
    // Scale A near s so the ridge term visibly shrinks the solution.
    const DenseMatrix a = gaussian_test_matrix(n, d, 60'000 + 2 * c.seed, state.s() / std::sqrt(static_cast<double>(n)));
    const DenseMatrix bm = gaussian_test_matrix(n, 1, 60'001 + 2 * c.seed);
    const std::vector<double> b(bm.data().begin(), bm.data().end());
    std::vector<double> lifted_b(state.layout().height(), 0.0);
    for (std::size_t i = 0; i < n; ++i) lifted_b[state.layout().data_index(i)] = b[i];
    const auto exact = exact_lsq(lifted_matrix(a, state.s(), state.layout()), lifted_b);
    const auto ridge = ridge_solution(a, b, state.s() * state.s());
    double diff = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      diff = std::max(diff, std::abs(exact[j] - ridge[j]));
      norm = std::max(norm, std::abs(ridge[j]));
    }
    rep.observed_lhs[t] = norm == 0.0 ? diff : diff / norm;
  });
  const double worst = *std::max_element(rep.observed_lhs.begin(), rep.observed_lhs.end());
  rep.statistic = worst;
  rep.target = tol;
  settle_statistic(rep, worst <= tol);
  return rep;
}

std::vector<BoundReport> verification_suite(bool quick) {
  auto pick = [quick](std::size_t full, std::size_t small) { return quick ? small : full; };
  std::vector<BoundReport> out;

  out.push_back(sketch_algebra_check(pick(1000, 100)));

  out.push_back(guard_check_lra(pick(50, 10)));
  out.push_back(guard_check_matprod(pick(50, 10)));
  out.push_back(guard_check_regress(pick(50, 10)));

  const PrivacyBudget unit{1.0, 0.01};
  out.push_back(dp_density_ratio_check(6, 4, unit, pick(100'000, 20'000)));
  DensityRatioOptions weak;
  weak.scale = 0.05;
  weak.enforce_guard = false;
  out.push_back(negative_control(dp_density_ratio_check(6, 4, unit, pick(100'000, 20'000), weak)));

  LraConfig lra;
  lra.n = 200;
  lra.d = 200;
  lra.k = 5;
  lra.p = 6;
  lra.budget = unit;
  const auto bounds = bound_check_lra(lra, pick(50, 5));
  out.push_back(bounds.frobenius);
  out.push_back(bounds.spectral);
  out.push_back(lra_nonprivate_check(lra, pick(20, 3)));

  MatProdConfig mp;
  mp.n = 100;
  mp.d1 = 20;
  mp.d2 = 20;
  mp.budget = unit;
  mp.accuracy = {0.5, 0.2};
  out.push_back(bound_check_matprod(mp, pick(100, 20)));
  MatProdConfig small = mp;
  small.n = 20;
  small.d1 = 3;
  small.d2 = 3;
  out.push_back(mc_matprod_unbiased(small, pick(10'000, 1000)));
  out.push_back(negative_control(mc_matprod_unbiased(small, pick(10'000, 1000), false)));
  out.push_back(mc_inner_product(96, 0.5, pick(2000, 400)));

  RegressConfig rg;
  rg.n = 200;
  rg.d = 10;
  rg.budget = unit;
  rg.accuracy = {0.5, 0.2};
  out.push_back(bound_check_regress(rg, pick(100, 20)));
  out.push_back(ridge_equivalence_check(30, 5, pick(20, 5)));
  out.push_back(mc_subspace_embedding(5, 60, 516, 0.5, 0.2, pick(400, 100)));

  out.push_back(mc_pseudoinverse_frobenius(10, 11, pick(10'000, 2000)));
  out.push_back(mc_pseudoinverse_spectral(5, 6, pick(10'000, 2000)));
  out.push_back(mc_jl(10, 800, 0.2, pick(200, 50)));

  out.push_back(space_accounting_check());
  return out;
}

}  // namespace dpsk
