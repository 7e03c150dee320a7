#include "dpsk/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "dpsk/harness.hpp"
#include "dpsk/lra.hpp"
#include "dpsk/matprod.hpp"
#include "dpsk/regress.hpp"

namespace dpsk {
namespace {

using nlohmann::json;

const char* command_name(Command c) {
  switch (c) {
    case Command::lra: return "lra";
    case Command::multiply: return "multiply";
    case Command::regress: return "regress";
    case Command::verify: return "verify";
    case Command::bench: return "bench";
  }
  return "?";
}

void add_budget(CLI::App* app, RunConfig& c) {
  app->add_option("--eps", c.eps, "privacy parameter epsilon")->required();
  app->add_option("--delta", c.delta, "privacy parameter delta")->required();
  app->add_option("--seed", c.seed, "sketch seed");
}

void add_io(CLI::App* app, RunConfig& c, std::string& format, bool second_input) {
  app->add_option("--input", c.input, "matrix A")->required();
  if (second_input) app->add_option("--input-b", c.input_b, "matrix B or vector b")->required();
  app->add_option("--format", format, "csv or dpbin");
  app->add_option("--report", c.report, "also write the JSON report here");
  app->add_option("--output", c.output, "write the published result here");
  app->add_flag("--oracle", c.oracle, "compare against the exact non-private answer");
}

void add_lra(CLI::App* app, RunConfig& c, bool rank_required) {
  auto* rank = app->add_option("--rank", c.rank, "target rank k");
  if (rank_required) rank->required();
  app->add_option("--oversample", c.oversample, "oversampling p (default k+1)");
  app->add_option("--constant-c", c.constant_c, "lift constant c in w");
  app->add_option("--halve-budget", c.halve_budget, "run at (eps/2, delta/2)");
  app->add_flag("--symmetric", c.symmetric, "input is symmetric");
}

void add_accuracy(CLI::App* app, RunConfig& c) {
  app->add_option("--alpha", c.alpha, "accuracy alpha");
  app->add_option("--beta", c.beta, "failure probability beta");
}

void validate(const RunConfig& c) {
  try {
    if (c.command == Command::verify) return;
    PrivacyBudget::make(c.eps, c.delta);
    if (c.command == Command::multiply || c.command == Command::regress) AccuracySpec::make(c.alpha, c.beta);
  } catch (const ParameterDomainError& e) {
    throw UsageError(e.what());
  }
  if (c.command == Command::lra || c.command == Command::bench) {
    if (c.rank == 0) throw UsageError("--rank must be at least 1");
    if (c.oversample == 1) throw UsageError("--oversample must be at least 2");
    if (!(c.constant_c > 0.0) || !std::isfinite(c.constant_c)) throw UsageError("--constant-c must be positive");
  }
  if (!(c.matmult_constant > 0.0) || !(c.linreg_constant > 0.0)) {
    throw UsageError("dimension constants must be positive");
  }
  if (c.repeat == 0) throw UsageError("--repeat must be at least 1");
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

json budget_json(const PrivacyBudget& b) { return {{"eps", b.eps}, {"delta", b.delta}}; }

json guard_json(double required, double lift, const char* lift_name) {
  return {{"required_sigma_min", required},
          {lift_name, lift},
          {"sigma_min_lower_bound", lift},
          {"passed", lift >= required}};
}

// Streams A into an LRA state and returns the factor; the peak entry count
// covers the sketch state plus the one row buffer.
struct LraRun {
  LraConfig config;
  LowRankFactor factor;
  double w = 0.0;
  double threshold = 0.0;
  std::size_t retained = 0;
  std::size_t peak = 0;
};

LraRun stream_lra(const RunConfig& rc) {
  const MatrixShape shape = scan_shape(rc.input, rc.format);
  LraRun out;
  LraConfig& c = out.config;
  c.n = shape.rows;
  c.d = shape.cols;
  c.k = rc.rank;
  c.p = rc.oversample;
  c.budget = {rc.eps, rc.delta};
  c.seed = rc.seed;
  c.symmetric = rc.symmetric;
  c.halve_budget = rc.halve_budget;
  c.lift_constant = rc.constant_c;
  LraState state(c);
  RowReader reader(rc.input, rc.format);
  std::vector<double> row;
  std::size_t i = 0;
  while (reader.next(row)) {
    state.ingest_row(i++, row);
    out.peak = std::max(out.peak, state.retained_entries() + row.size());
  }
  out.factor = state.finalize();
  out.w = state.w();
  out.threshold = state.guard_threshold();
  out.retained = state.retained_entries();
  return out;
}

std::size_t lra_space_bound(const LraConfig& c) {
  const std::size_t width = c.sketch_width();
  const std::size_t sketch = c.symmetric ? 3 * c.n * width : 2 * (c.n + c.d) * width;
  return sketch + c.d;
}

json space_json(std::size_t retained, std::size_t peak, std::size_t bound) {
  if (peak > bound) throw ContractViolation("space instrumentation: peak " + std::to_string(peak) +
                                            " exceeds the bound " + std::to_string(bound));
  return {{"retained", retained}, {"peak", peak}, {"bound", bound}};
}

void check_rows(const MatrixShape& a, const MatrixShape& b, const char* what) {
  if (a.rows != b.rows) {
    throw ContractViolation(std::string(what) + ": A has " + std::to_string(a.rows) + " rows but B has " +
                            std::to_string(b.rows));
  }
}

}  // namespace

RunConfig parse_args(const std::vector<std::string>& args) {
  RunConfig c;
  std::string format = "csv";
  CLI::App app{"Differentially private streaming sketches", "dpsk"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every command");

  auto* lra = app.add_subcommand("lra", "private rank-k approximation");
  add_budget(lra, c);
  add_io(lra, c, format, false);
  add_lra(lra, c, true);

  auto* multiply = app.add_subcommand("multiply", "private matrix product AᵀB");
  add_budget(multiply, c);
  add_io(multiply, c, format, true);
  add_accuracy(multiply, c);
  multiply->add_option("--matmult-constant", c.matmult_constant, "constant in the sketch dimension");

  auto* regress = app.add_subcommand("regress", "private least squares min ‖Ax − b‖");
  add_budget(regress, c);
  add_io(regress, c, format, true);
  add_accuracy(regress, c);
  regress->add_option("--linreg-constant", c.linreg_constant, "constant in the sketch dimension");

  auto* verify = app.add_subcommand("verify", "run the verification suite");
  verify->add_flag("--quick", c.quick, "reduced trial counts");
  verify->add_option("--report", c.report, "also write the JSON report here");

  auto* bench = app.add_subcommand("bench", "time the streaming mechanisms");
  add_budget(bench, c);
  bench->add_option("--input", c.input, "matrix A")->required();
  bench->add_option("--input-b", c.input_b, "matrix B for the product");
  bench->add_option("--format", format, "csv or dpbin");
  bench->add_option("--report", c.report, "also write the JSON report here");
  bench->add_option("--repeat", c.repeat, "runs per mechanism");
  add_lra(bench, c, false);
  add_accuracy(bench, c);

  std::vector<const char*> argv{"dpsk"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    std::ostringstream out, err;
    const int code = app.exit(e, out, err);
    if (code == 0) throw HelpRequested(out.str());
    throw UsageError(e.what());
  }

  if (lra->parsed()) c.command = Command::lra;
  else if (multiply->parsed()) c.command = Command::multiply;
  else if (regress->parsed()) c.command = Command::regress;
  else if (verify->parsed()) c.command = Command::verify;
  else c.command = Command::bench;
  c.format = parse_format(format);
  validate(c);
  return c;
}

json run_lra(const RunConfig& rc) {
  const LraRun res = stream_lra(rc);
  const LraConfig& c = res.config;
  json report;
  report["command"] = "lra";
  report["params"] = {{"n", c.n},
                      {"d", c.d},
                      {"rank", c.k},
                      {"oversample", c.oversampling()},
                      {"seed", c.seed},
                      {"symmetric", c.symmetric},
                      {"halve_budget", c.halve_budget},
                      {"constant_c", c.lift_constant},
                      {"budget", budget_json(c.budget)},
                      {"effective_budget", budget_json(c.effective_budget())},
                      {"input", rc.input},
                      {"format", format_name(rc.format)}};
  report["guard_report"] = guard_json(res.threshold, res.w, "lift_w");
  report["result"] = {{"rank", res.factor.rank},
                      {"reduced_rank", res.factor.reduced_rank},
                      {"lambda", res.factor.lambda},
                      {"factor_rows", res.factor.u_hat.rows()},
                      {"factor_cols", res.factor.u_hat.cols()}};
  if (!rc.output.empty()) {
    save_matrix(rc.output, res.factor.u_hat, rc.format);
    report["result"]["output"] = rc.output;
  }
  report["space_entries"] = space_json(res.retained, res.peak, lra_space_bound(c));

  if (rc.oracle) {
    const DenseMatrix a = load_matrix(rc.input, rc.format);
    const DenseMatrix residual = a - reconstruct(res.factor, c);
    const auto sigma = svd(a).sigma;
    report["error_vs_oracle"] = {
        {"frobenius", frobenius_norm(residual)},
        {"spectral", spectral_norm(residual)},
        {"optimal_frobenius", frobenius_norm(a - exact_truncated_svd(a, std::min(c.k, sigma.size())))},
        {"sigma_k_plus_1", c.k < sigma.size() ? sigma[c.k] : 0.0}};
    // Both lifted halves of the stream, (wI | A) and (Aᵀ | wI).
    const double w = res.w;
    double observed = guard::verify_spectral_guard(hstack(w * DenseMatrix::identity(c.n), a), res.threshold)
                          .observed_sigma_min;
    if (!c.symmetric) {
      observed = std::min(observed, guard::verify_spectral_guard(
                                        hstack(a.transpose(), w * DenseMatrix::identity(c.d)), res.threshold)
                                        .observed_sigma_min);
    }
    report["guard_report"]["observed_sigma_min"] = observed;
    report["guard_report"]["passed"] = observed >= res.threshold;
  }
  return report;
}

json run_multiply(const RunConfig& rc) {
  const MatrixShape sa = scan_shape(rc.input, rc.format);
  const MatrixShape sb = scan_shape(rc.input_b, rc.format);
  check_rows(sa, sb, "multiply");
  MatProdConfig c;
  c.n = sa.rows;
  c.d1 = sa.cols;
  c.d2 = sb.cols;
  c.budget = {rc.eps, rc.delta};
  c.accuracy = {rc.alpha, rc.beta};
  c.seed = rc.seed;
  c.dim_constant = rc.matmult_constant;
  MatProdState state(c);
  RowReader ra(rc.input, rc.format), rb(rc.input_b, rc.format);
  std::vector<double> row_a, row_b;
  std::size_t i = 0, peak = 0;
  while (ra.next(row_a)) {
    rb.next(row_b);
    state.ingest_a_row(i, row_a);
    state.ingest_b_row(i, row_b);
    ++i;
    peak = std::max(peak, state.retained_entries() + row_a.size() + row_b.size());
  }
  const DenseMatrix product = state.product_query();
  const double required = guard::sigma_min_psg1(c.budget, state.r());

  json report;
  report["command"] = "multiply";
  report["params"] = {{"n", c.n},
                      {"d1", c.d1},
                      {"d2", c.d2},
                      {"alpha", c.accuracy.alpha},
                      {"beta", c.accuracy.beta},
                      {"seed", c.seed},
                      {"sketch_rows", state.r()},
                      {"lift_s", state.s()},
                      {"matmult_constant", c.dim_constant},
                      {"budget", budget_json(c.budget)},
                      {"input", rc.input},
                      {"input_b", rc.input_b},
                      {"format", format_name(rc.format)}};
  report["guard_report"] = guard_json(required, state.s(), "lift_s");
  report["result"] = {{"rows", product.rows()}, {"cols", product.cols()}};
  if (!rc.output.empty()) {
    save_matrix(rc.output, product, rc.format);
    report["result"]["output"] = rc.output;
  }
  report["space_entries"] = space_json(state.retained_entries(), peak, state.r() * (c.d1 + c.d2) + c.d1 + c.d2);

  if (rc.oracle) {
    const DenseMatrix a = load_matrix(rc.input, rc.format);
    const DenseMatrix b = load_matrix(rc.input_b, rc.format);
    const double err = frobenius_norm(exact_product(a, b) - product);
    const double rhs = c.accuracy.alpha * frobenius_norm(a) * frobenius_norm(b) +
                       state.s() * state.s() * std::sqrt(static_cast<double>(c.n)) * c.accuracy.alpha;
    report["error_vs_oracle"] = {{"frobenius", err}, {"bound_rhs", rhs}, {"within_bound", err <= rhs}};
    const double observed =
        std::min(guard::verify_spectral_guard(lifted_matrix(a, state.s(), state.layout()), required).observed_sigma_min,
                 guard::verify_spectral_guard(lifted_matrix(b, state.s(), state.layout()), required).observed_sigma_min);
    report["guard_report"]["observed_sigma_min"] = observed;
    report["guard_report"]["passed"] = observed >= required;
  }
  return report;
}

json run_regress(const RunConfig& rc) {
  const MatrixShape sa = scan_shape(rc.input, rc.format);
  const DenseMatrix bm = load_matrix(rc.input_b, rc.format);
  check_rows(sa, {bm.rows(), bm.cols()}, "regress");
  if (bm.cols() != 1) throw ContractViolation("regress: b must have a single column");
  const std::vector<double> b(bm.data().begin(), bm.data().end());
  RegressConfig c;
  c.n = sa.rows;
  c.d = sa.cols;
  c.budget = {rc.eps, rc.delta};
  c.accuracy = {rc.alpha, rc.beta};
  c.seed = rc.seed;
  c.dim_constant = rc.linreg_constant;
  RegressState state(c);
  RowReader ra(rc.input, rc.format);
  std::vector<double> row;
  std::size_t i = 0, peak = 0;
  while (ra.next(row)) {
    state.ingest_row(i++, row);
    peak = std::max(peak, state.retained_entries() + row.size());
  }
  const std::vector<double> x = state.query(b);
  const double required = guard::sigma_min_psg1(c.budget, state.r());

  json report;
  report["command"] = "regress";
  report["params"] = {{"n", c.n},
                      {"d", c.d},
                      {"alpha", c.accuracy.alpha},
                      {"beta", c.accuracy.beta},
                      {"seed", c.seed},
                      {"sketch_rows", state.r()},
                      {"lift_s", state.s()},
                      {"linreg_constant", c.dim_constant},
                      {"budget", budget_json(c.budget)},
                      {"composed_budget", budget_json(state.composed_budget())},
                      {"input", rc.input},
                      {"input_b", rc.input_b},
                      {"format", format_name(rc.format)}};
  report["guard_report"] = guard_json(required, state.s(), "lift_s");
  report["result"] = {{"solution", x}};
  if (!rc.output.empty()) {
    save_matrix(rc.output, DenseMatrix(x.size(), 1, x), rc.format);
    report["result"]["output"] = rc.output;
  }
  report["space_entries"] = space_json(state.retained_entries(), peak, state.r() * c.d + c.d);

  if (rc.oracle) {
    const DenseMatrix a = load_matrix(rc.input, rc.format);
    auto residual = [&](std::span<const double> sol) {
      const auto ax = matvec(a, sol);
      double s = 0.0;
      for (std::size_t j = 0; j < b.size(); ++j) s += (ax[j] - b[j]) * (ax[j] - b[j]);
      return std::sqrt(s);
    };
    const double got = residual(x);
    const double best = residual(exact_lsq(a, b));
    const double rhs = (1.0 + c.accuracy.alpha) * best +
                       state.s() * state.s() * std::sqrt(static_cast<double>(c.n)) * c.accuracy.alpha;
    report["error_vs_oracle"] = {
        {"residual", got}, {"optimal_residual", best}, {"bound_rhs", rhs}, {"within_bound", got <= rhs}};
    const double observed =
        guard::verify_spectral_guard(lifted_matrix(a, state.s(), state.layout()), required).observed_sigma_min;
    report["guard_report"]["observed_sigma_min"] = observed;
    report["guard_report"]["passed"] = observed >= required;
  }
  return report;
}

json run_verify(const RunConfig& rc) {
  json checks = json::array();
  bool all = true;
  for (const BoundReport& r : verification_suite(rc.quick)) {
    checks.push_back(to_json(r));
    all = all && r.pass;
  }
  return {{"command", "verify"},
          {"params", {{"quick", rc.quick}, {"threads", harness_threads()}}},
          {"checks", checks},
          {"pass", all}};
}

json run_bench(const RunConfig& rc) {
  auto summarize = [](std::vector<double> ms, std::size_t rows) {
    std::vector<double> sorted = ms;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    return json{{"runs_ms", ms},
                {"min_ms", sorted.front()},
                {"median_ms", median},
                {"rows_per_second", median > 0.0 ? 1000.0 * static_cast<double>(rows) / median : 0.0}};
  };
  json report;
  report["command"] = "bench";
  report["params"] = {{"rank", rc.rank}, {"repeat", rc.repeat}, {"seed", rc.seed},
                      {"budget", budget_json({rc.eps, rc.delta})}, {"input", rc.input},
                      {"format", format_name(rc.format)}};
  RunConfig quiet = rc;
  quiet.oracle = false;
  quiet.output.clear();
  const MatrixShape shape = scan_shape(rc.input, rc.format);
  std::vector<double> times;
  std::size_t retained = 0;
  for (std::size_t t = 0; t < rc.repeat; ++t) {
    const auto start = std::chrono::steady_clock::now();
    retained = stream_lra(quiet).retained;
    times.push_back(elapsed_ms(start));
  }
  report["lra"] = summarize(times, shape.rows);
  report["space_entries"] = {{"lra", retained}};
  if (!rc.input_b.empty()) {
    quiet.input_b = rc.input_b;
    times.clear();
    for (std::size_t t = 0; t < rc.repeat; ++t) {
      const auto start = std::chrono::steady_clock::now();
      const json r = run_multiply(quiet);
      times.push_back(elapsed_ms(start));
      report["space_entries"]["multiply"] = r["space_entries"]["retained"];
    }
    report["multiply"] = summarize(times, shape.rows);
  }
  return report;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  json report;
  try {
    switch (config.command) {
      case Command::lra: report = run_lra(config); break;
      case Command::multiply: report = run_multiply(config); break;
      case Command::regress: report = run_regress(config); break;
      case Command::verify: report = run_verify(config); break;
      case Command::bench: report = run_bench(config); break;
    }
  } catch (const ConfigurationError& e) {
    err << "dpsk " << command_name(config.command) << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParameterDomainError& e) {
    err << "dpsk " << command_name(config.command) << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "dpsk " << command_name(config.command) << ": " << e.what() << "\n";
    return kExitMechanism;
  }
  report["wall_time_ms"] = elapsed_ms(start);
  const std::string text = report.dump(2);
  out << text << "\n";
  if (!config.report.empty()) {
    std::ofstream file(config.report, std::ios::trunc);
    file << text << "\n";
    if (!file) {
      err << "dpsk: cannot write report '" << config.report << "'\n";
      return kExitMechanism;
    }
  }
  if (config.command == Command::verify && !report["pass"].get<bool>()) return kExitVerification;
  return kExitOk;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = parse_args(args);
  } catch (const HelpRequested& h) {
    out << h.what();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "dpsk: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  }
  return run(config, out, err);
}

}  // namespace dpsk
