// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.
//
// usage: acceptance <path to dpsk executable> <fixtures directory>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <sys/wait.h>

#include "dpsk/harness.hpp"
#include "dpsk/lra.hpp"
#include "dpsk/matprod.hpp"
#include "dpsk/matrix_io.hpp"
#include "dpsk/regress.hpp"

namespace fs = std::filesystem;
using dpsk::BoundReport;
using dpsk::DenseMatrix;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string describe(const BoundReport& r) {
  std::ostringstream s;
  s << r.check << " " << r.violations << "/" << r.trials;
  if (r.allowed > 0.0) s << " (allowed " << r.allowed << " + " << r.slack << ")";
  if (r.statistic) s << " stat " << *r.statistic;
  if (r.target) s << " target " << *r.target;
  s << (r.pass ? " ok" : " FAILED");
  return s.str();
}

// A bound whose negative control must fail.
Verdict with_control(const BoundReport& bound, const BoundReport& control) {
  return {bound.pass && !control.pass,
          describe(bound) + "; control " + describe(control) + (control.pass ? " (control did not fail)" : "")};
}

Verdict all_of(std::initializer_list<Verdict> parts) {
  Verdict out{true, ""};
  for (const auto& p : parts) {
    out.pass = out.pass && p.pass;
    out.detail += (out.detail.empty() ? "" : "; ") + p.detail;
  }
  return out;
}

Verdict one(const BoundReport& r) { return {r.pass, describe(r)}; }

int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Verdict()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs > limit_s) {
    v.pass = false;
    v.detail += "; over the time limit";
  }
  if (!v.pass) ++failures;
  std::printf("criterion %2d %-34s %s  [%.1f s / %.0f s] %s\n", id, name, v.pass ? "PASS" : "FAIL", secs, limit_s,
              v.detail.c_str());
  std::fflush(stdout);
}

dpsk::LraConfig lra_base() {
  dpsk::LraConfig c;
  c.n = 200;
  c.d = 200;
  c.k = 5;
  c.p = 6;
  c.budget = {1.0, 0.01};
  return c;
}

// ---- end-to-end helpers ----------------------------------------------------

struct CliRun {
  int code = -1;
  json report;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

CliRun run_cli(const std::string& exe, const std::vector<std::string>& args, const fs::path& scratch) {
  std::string cmd = quote(exe);
  for (const auto& a : args) cmd += " " + quote(a);
  const fs::path out = scratch / "stdout.json";
  cmd += " > " + quote(out.string()) + " 2> " + quote((scratch / "stderr.txt").string());
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out);
  r.report = json::parse(in, nullptr, false);
  return r;
}

// Minimal schema: required keys with JSON types.
bool has(const json& j, const char* key, json::value_t type) {
  if (!j.is_object() || !j.contains(key)) return false;
  const auto t = j.at(key).type();
  if (type == json::value_t::number_float) {
    return t == json::value_t::number_float || t == json::value_t::number_integer ||
           t == json::value_t::number_unsigned;
  }
  if (type == json::value_t::number_unsigned) {
    return t == json::value_t::number_unsigned || t == json::value_t::number_integer;
  }
  return t == type;
}

std::string schema_errors(const json& r, bool mechanism) {
  using V = json::value_t;
  std::string e;
  auto need = [&](const json& j, const char* where, const char* key, V type) {
    if (!has(j, key, type)) e += std::string(" ") + where + "." + key;
  };
  need(r, "report", "command", V::string);
  need(r, "report", "params", V::object);
  need(r, "report", "wall_time_ms", V::number_float);
  if (mechanism) {
    need(r, "report", "guard_report", V::object);
    need(r, "report", "space_entries", V::object);
    need(r, "report", "error_vs_oracle", V::object);
    if (e.empty()) {
      need(r["guard_report"], "guard_report", "required_sigma_min", V::number_float);
      need(r["guard_report"], "guard_report", "observed_sigma_min", V::number_float);
      need(r["guard_report"], "guard_report", "passed", V::boolean);
      need(r["space_entries"], "space_entries", "retained", V::number_unsigned);
      need(r["space_entries"], "space_entries", "peak", V::number_unsigned);
      need(r["space_entries"], "space_entries", "bound", V::number_unsigned);
    }
  }
  return e;
}

Verdict end_to_end(const std::string& exe, const fs::path& fixtures) {
  const fs::path scratch = fs::temp_directory_path() / "dpsk_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  const std::string a_path = (fixtures / "a.csv").string();
  const std::string b_path = (fixtures / "b.csv").string();
  const std::string y_path = (fixtures / "y.csv").string();
  const DenseMatrix a = dpsk::load_matrix(a_path, dpsk::MatrixFormat::csv);
  const DenseMatrix b = dpsk::load_matrix(b_path, dpsk::MatrixFormat::csv);
  const DenseMatrix ym = dpsk::load_matrix(y_path, dpsk::MatrixFormat::csv);
  const std::vector<double> y(ym.data().begin(), ym.data().end());
  std::vector<Verdict> parts;
  auto check = [&](bool ok, const std::string& what) { parts.push_back({ok, what + (ok ? " ok" : " FAILED")}); };
  auto schema = [&](const CliRun& r, const char* name, bool mechanism) {
    const std::string e = r.report.is_discarded() ? " unparsable" : schema_errors(r.report, mechanism);
    check(r.code == 0 && e.empty(), std::string(name) + " exit " + std::to_string(r.code) + (e.empty() ? "" : " schema:" + e));
  };

  // lra
  {
    const auto r = run_cli(exe, {"lra", "--eps", "1", "--delta", "0.01", "--rank", "5", "--input", a_path, "--oracle",
                                 "--output", (scratch / "u.csv").string()},
                           scratch);
    schema(r, "lra", true);
    if (r.code == 0 && !r.report.is_discarded()) {
      dpsk::LraConfig c = lra_base();
      c.p = 0;
      dpsk::LraState state(c);
      for (std::size_t i = 0; i < a.rows(); ++i) state.ingest_row(i, a.row(i));
      const auto factor = state.finalize();
      const DenseMatrix residual = a - dpsk::reconstruct(factor, c);
      const auto& e = r.report["error_vs_oracle"];
      check(e["frobenius"].get<double>() == dpsk::frobenius_norm(residual) &&
                e["spectral"].get<double>() == dpsk::spectral_norm(residual) &&
                e["optimal_frobenius"].get<double>() == dpsk::frobenius_norm(a - dpsk::exact_truncated_svd(a, 5)),
            "lra oracle bit-exact");
      check(dpsk::load_matrix(scratch / "u.csv", dpsk::MatrixFormat::csv) == factor.u_hat, "lra factor file");
    }
  }
  // multiply
  {
    const auto r = run_cli(exe, {"multiply", "--eps", "1", "--delta", "0.01", "--input", a_path, "--input-b", b_path,
                                 "--oracle"},
                           scratch);
    schema(r, "multiply", true);
    if (r.code == 0 && !r.report.is_discarded()) {
      dpsk::MatProdConfig c;
      c.n = a.rows();
      c.d1 = a.cols();
      c.d2 = b.cols();
      c.budget = {1.0, 0.01};
      c.accuracy = {0.5, 0.2};
      dpsk::MatProdState state(c);
      for (std::size_t i = 0; i < a.rows(); ++i) {
        state.ingest_a_row(i, a.row(i));
        state.ingest_b_row(i, b.row(i));
      }
      const double err = dpsk::frobenius_norm(dpsk::exact_product(a, b) - state.product_query());
      check(r.report["error_vs_oracle"]["frobenius"].get<double>() == err, "multiply oracle bit-exact");
    }
  }
  // regress
  {
    const auto r = run_cli(exe, {"regress", "--eps", "1", "--delta", "0.01", "--input", a_path, "--input-b", y_path,
                                 "--oracle"},
                           scratch);
    schema(r, "regress", true);
    if (r.code == 0 && !r.report.is_discarded()) {
      dpsk::RegressConfig c;
      c.n = a.rows();
      c.d = a.cols();
      c.budget = {1.0, 0.01};
      c.accuracy = {0.5, 0.2};
      dpsk::RegressState state(c);
      for (std::size_t i = 0; i < a.rows(); ++i) state.ingest_row(i, a.row(i));
      const auto x = state.query(y);
      auto residual = [&](std::span<const double> sol) {
        const auto ax = dpsk::matvec(a, sol);
        double s = 0.0;
        for (std::size_t j = 0; j < y.size(); ++j) s += (ax[j] - y[j]) * (ax[j] - y[j]);
        return std::sqrt(s);
      };
      const auto& e = r.report["error_vs_oracle"];
      check(e["residual"].get<double>() == residual(x) &&
                e["optimal_residual"].get<double>() == residual(dpsk::exact_lsq(a, y)),
            "regress oracle bit-exact");
    }
  }
  // bench
  {
    const auto r = run_cli(exe, {"bench", "--eps", "1", "--delta", "0.01", "--rank", "5", "--repeat", "1", "--input",
                                 a_path, "--input-b", b_path},
                           scratch);
    schema(r, "bench", false);
  }
  // verify: exit code must agree with the report's verdict.
  {
    const auto r = run_cli(exe, {"verify", "--quick"}, scratch);
    const bool parsed = !r.report.is_discarded() && has(r.report, "checks", json::value_t::array) &&
                        has(r.report, "pass", json::value_t::boolean) && schema_errors(r.report, false).empty();
    bool rows_ok = parsed;
    if (parsed) {
      for (const auto& c : r.report["checks"]) {
        for (const char* k : {"check", "trials", "violations", "allowed", "pass", "seeds"}) rows_ok = rows_ok && c.contains(k);
      }
    }
    const int want = parsed && r.report["pass"].get<bool>() ? 0 : 3;
    check(rows_ok && r.code == want, "verify exit " + std::to_string(r.code) + " matches report");
  }
  fs::remove_all(scratch);

  Verdict out{true, ""};
  for (const auto& p : parts) {
    out.pass = out.pass && p.pass;
    out.detail += (out.detail.empty() ? "" : ", ") + p.detail;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: acceptance <dpsk executable> <fixtures directory>\n";
    return 2;
  }
  const std::string exe = argv[1];
  const fs::path fixtures = argv[2];
  const dpsk::PrivacyBudget unit{1.0, 0.01};

  criterion(1, "sketch algebra", 5, [] { return one(dpsk::sketch_algebra_check(1000)); });

  criterion(2, "spectral guard sufficiency", 10, [] {
    return all_of({one(dpsk::guard_check_lra(50)), one(dpsk::guard_check_matprod(50)),
                   one(dpsk::guard_check_regress(50))});
  });

  criterion(3, "desk-scale DP check (psg1)", 60, [&] {
    dpsk::DensityRatioOptions weak;
    weak.scale = 0.05;
    weak.enforce_guard = false;
    return with_control(dpsk::dp_density_ratio_check(6, 4, unit, 100'000),
                        dpsk::dp_density_ratio_check(6, 4, unit, 100'000, weak));
  });

  // Criteria 4 and 5 share one run; the inflated rerun is the negative control.
  std::optional<std::pair<dpsk::LraBoundReports, dpsk::LraBoundReports>> lra;
  auto lra_reports = [&lra]() -> const auto& {
    if (!lra) lra.emplace(dpsk::bound_check_lra(lra_base(), 50), dpsk::bound_check_lra(lra_base(), 50, 3.0));
    return *lra;
  };
  criterion(4, "LRA Frobenius bound", 120, [&] {
    const auto& [bound, inflated] = lra_reports();
    return with_control(bound.frobenius, inflated.frobenius);
  });
  criterion(5, "LRA spectral bound", 120, [&] {
    const auto& [bound, inflated] = lra_reports();
    return with_control(bound.spectral, inflated.spectral);
  });

  criterion(6, "non-private range finder", 60, [] {
    auto nonsym = lra_base();
    auto sym = lra_base();
    sym.symmetric = true;
    return all_of({with_control(dpsk::lra_nonprivate_check(nonsym, 20), dpsk::lra_nonprivate_check(nonsym, 20, 0.5)),
                   one(dpsk::lra_nonprivate_check(sym, 20))});
  });

  criterion(7, "MatMult bound and unbiasedness", 180, [&] {
    dpsk::MatProdConfig mp;
    mp.n = 100;
    mp.d1 = 20;
    mp.d2 = 20;
    mp.budget = unit;
    mp.accuracy = {0.5, 0.2};
    dpsk::MatProdConfig small = mp;
    small.n = 20;
    small.d1 = 3;
    small.d2 = 3;
    return all_of({with_control(dpsk::bound_check_matprod(mp, 100), dpsk::bound_check_matprod(mp, 100, 10.0)),
                   with_control(dpsk::mc_matprod_unbiased(small, 10'000),
                                dpsk::mc_matprod_unbiased(small, 10'000, false))});
  });

  criterion(8, "LinReg bound and ridge equivalence", 180, [&] {
    dpsk::RegressConfig rg;
    rg.n = 200;
    rg.d = 10;
    rg.budget = unit;
    rg.accuracy = {0.5, 0.2};
    return all_of({with_control(dpsk::bound_check_regress(rg, 100), dpsk::bound_check_regress(rg, 100, 1e9)),
                   one(dpsk::ridge_equivalence_check(30, 5, 20))});
  });

  criterion(9, "random-matrix moments", 120, [] {
    return all_of({one(dpsk::mc_pseudoinverse_frobenius(10, 11, 10'000)),
                   one(dpsk::mc_pseudoinverse_spectral(5, 6, 10'000)),
                   one(dpsk::mc_jl(10, 800, 0.2, 1000))});
  });

  criterion(10, "space accounting", 10, [] { return one(dpsk::space_accounting_check()); });

  criterion(11, "end-to-end CLI", 60, [&] { return end_to_end(exe, fixtures); });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
