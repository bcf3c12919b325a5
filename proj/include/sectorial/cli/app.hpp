#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "sectorial/cli/serialize.hpp"
#include "sectorial/generators.hpp"
#include "sectorial/linops.hpp"
#include "sectorial/verify.hpp"

namespace sectorial::cli {

using json = nlohmann::json;

struct RunConfig {
  std::string mode;  // eval, check, suite
  std::string matrix;
  std::vector<std::string> functions;
  std::string calculus = "stieltjes-ext";
  std::optional<double> tol;
  std::uint64_t seed = 0;
  std::string report;
  std::optional<std::size_t> nodes;
  std::string check;  // check mode: kind, default by function count
  std::vector<double> params;
  std::string suite_file;
  unsigned threads = 0;  // 0: hardware concurrency
};

/// Thrown for configuration problems (exit code 2).
struct ConfigError : Error {
  using Error::Error;
};

namespace detail {

inline bool config_code(ErrorCode c) {
  return c == ErrorCode::BadSpec || c == ErrorCode::BadParams || c == ErrorCode::UnknownBuiltin;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(ErrorCode::BadSpec, "cannot read '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(ErrorCode::BadSpec, "invalid JSON in '" + path + "': " + e.what());
  }
}

inline bool is_file(const std::string& s) {
  std::error_code ec;
  return std::filesystem::is_regular_file(s, ec);
}

/// Appends the run seed to random_sectorial specs given without one.
inline std::string with_seed(const std::string& spec, std::uint64_t seed) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  if (colon == std::string::npos) return spec;
  const std::string rest = spec.substr(colon + 1);
  if (name == "random_sectorial" && std::count(rest.begin(), rest.end(), ',') == 2)
    return spec + "," + std::to_string(seed);
  if (name == "zero_padded") {
    const auto comma = rest.find(',');
    if (comma != std::string::npos)
      return name + ":" + rest.substr(0, comma + 1) + with_seed(rest.substr(comma + 1), seed);
  }
  return spec;
}

inline std::string method_name(std::string s) {
  std::replace(s.begin(), s.end(), '-', '_');
  return s == "oracle" ? "eigen_oracle" : s;
}

inline cmat load_matrix(const RunConfig& c) {
  if (c.matrix.empty()) throw ConfigError(ErrorCode::BadSpec, "--matrix is required");
  if (is_file(c.matrix)) return io::matrix_from_json(read_json_file(c.matrix));
  return gen::generate(with_seed(c.matrix, c.seed));
}

inline FunctionSpec load_function(const std::string& s) {
  if (is_file(s)) return io::function_from_json(read_json_file(s));
  return parse_function(s);
}

/// Writes to path.tmp and renames over path.
inline void write_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError(ErrorCode::BadSpec, "cannot write '" + tmp + "'");
    out << text;
    out.flush();
    if (!out) throw ConfigError(ErrorCode::BadSpec, "write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw ConfigError(ErrorCode::BadSpec, "cannot rename report into '" + path + "'");
  }
}

inline std::string num(double x) {
  std::ostringstream s;
  s << std::setprecision(6) << x;
  return s.str();
}

inline void print_matrix(std::ostream& out, const cmat& A) {
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s%.12g%+.12gi", j ? "  " : "", A(i, j).real(), A(i, j).imag());
      out << buf;
    }
    out << "\n";
  }
}

inline void print_report(std::ostream& out, const CheckReport& r) {
  out << (r.informational ? "INFO " : r.passed ? "PASS " : r.status == "error" ? "ERROR" : "FAIL ") << " "
      << r.check_id << "  " << r.inputs << "  residual_rel=" << num(r.residual_rel) << " tol=" << num(r.tolerance);
  if (r.status == "error")
    if (auto m = r.find("message")) out << "  " << *m;
  out << "\n";
}

inline SuiteConfig suite_from_file(const std::string& path) {
  const json j = read_json_file(path);
  SuiteConfig s;
  try {
    s.name = j.value("name", "custom");
    for (const auto& c : j.at("checks")) {
      CheckSpec k;
      k.kind = c.at("kind").get<std::string>();
      k.functions = c.value("functions", std::vector<std::string>{});
      k.matrix = c.value("matrix", "");
      k.params = c.value("params", std::vector<double>{});
      k.calculus = method_name(c.value("calculus", "stieltjes_ext"));
      k.tol = c.value("tol", 1e-6);
      s.checks.push_back(std::move(k));
    }
  } catch (const json::exception& e) {
    throw ConfigError(ErrorCode::BadSpec, "bad suite config: " + std::string(e.what()));
  }
  return s;
}

inline EvalOptions eval_options(const RunConfig& c, double tol) {
  EvalOptions o;
  o.tol = tol;
  if (c.nodes) o.budget = *c.nodes;
  return o;
}

inline int run_eval(const RunConfig& c, std::ostream& out, json& report) {
  if (c.functions.size() != 1) throw ConfigError(ErrorCode::BadSpec, "eval takes exactly one --function");
  const double tol = c.tol.value_or(1e-10);
  const Method m = method_from_string(method_name(c.calculus));
  const cmat A = load_matrix(c);
  const FunctionSpec f = load_function(c.functions[0]);
  report = {{"mode", "eval"}, {"function", c.functions[0]}, {"matrix", c.matrix}, {"tol", tol},
            {"fixture_hash", fixture_hash(A)}};
  const SectorialMatrix op = analyze(A);
  const CalcResult r = evaluate(f, op, m, eval_options(c, tol));
  const bool ok = r.err_estimate <= tol;
  report["result"] = io::to_json(r);
  report["passed"] = ok;
  print_matrix(out, r.value);
  out << "method=" << to_string(r.method) << " err_estimate=" << num(r.err_estimate) << " nodes=" << r.nodes_used
      << (ok ? "" : "  (err_estimate exceeds tol)") << "\n";
  return ok ? 0 : 1;
}

inline int finish_suite(const SuiteResult& s, std::ostream& out, json& report) {
  for (const auto& r : s.reports) print_report(out, r);
  std::size_t counted = 0, passed = 0;
  for (const auto& r : s.reports)
    if (!r.informational) {
      ++counted;
      passed += r.passed;
    }
  out << passed << "/" << counted << " checks passed\n";
  report = io::to_json(s);
  return s.all_passed() ? 0 : 1;
}

inline unsigned thread_count(const RunConfig& c) {
  if (c.threads) return c.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

inline int run_check_mode(const RunConfig& c, std::ostream& out, json& report) {
  std::string kind = c.check;
  if (kind.empty()) {
    if (c.functions.size() == 2) kind = "product_formula";
    else if (c.functions.size() == 1) kind = "consistency";
    else throw ConfigError(ErrorCode::BadSpec, "check needs one or two --function values, or --check");
  }
  std::string matrix = c.matrix;
  if (!matrix.empty() && !is_file(matrix)) matrix = with_seed(matrix, c.seed);
  if (is_file(matrix)) throw ConfigError(ErrorCode::BadSpec, "check takes a generator spec for --matrix");
  CheckSpec k{kind, c.functions, matrix, c.params, method_name(c.calculus), c.tol.value_or(1e-6)};
  // configuration problems surface before the run so they map to exit code 2
  method_from_string(k.calculus);
  for (const auto& f : k.functions) parse_function(f);
  if (!matrix.empty()) gen::generate(matrix);
  SuiteConfig s{"check", {k}, eval_options(c, 1e-10)};
  return finish_suite(run_suite(s, 1), out, report);
}

inline int run_suite_mode(const RunConfig& c, std::ostream& out, json& report) {
  SuiteConfig s = c.suite_file.empty() ? default_suite() : suite_from_file(c.suite_file);
  s.eval = eval_options(c, 1e-10);
  for (const auto& k : s.checks) method_from_string(k.calculus);
  return finish_suite(run_suite(s, thread_count(c)), out, report);
}

}  // namespace detail

/// Runs one configuration; returns the exit code (0 ok, 1 failed checks or engine
/// errors, 2 configuration errors). The report, when requested, is written atomically
/// in every case.
inline int run(const RunConfig& c, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  json report;
  int code = 0;
  try {
    if (c.tol && !(*c.tol > 0.0)) throw ConfigError(ErrorCode::BadParams, "--tol must be positive");
    if (c.mode == "eval") code = detail::run_eval(c, out, report);
    else if (c.mode == "check") code = detail::run_check_mode(c, out, report);
    else if (c.mode == "suite") code = detail::run_suite_mode(c, out, report);
    else throw ConfigError(ErrorCode::BadSpec, "unknown mode '" + c.mode + "'");
  } catch (const Error& e) {
    const bool config = dynamic_cast<const ConfigError*>(&e) || detail::config_code(e.code());
    code = config ? 2 : 1;
    json j = io::error_json(to_string(e.code()), e.what());
    if (report.is_object())
      for (auto& [k, v] : j.items()) report[k] = v;
    else
      report = j;
    report["mode"] = c.mode;
    report["passed"] = false;
    err << "error: " << e.what() << "\n";
  }
  if (!c.report.empty()) {
    try {
      detail::write_atomic(c.report, report.dump(2) + "\n");
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
  }
  return code;
}

/// Parses argv and runs. Usage errors exit with 2.
inline int main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Functional calculus of sectorial matrices: evaluation and theorem checks"};
  app.require_subcommand(1, 1);
  RunConfig c;
  auto common = [&](CLI::App* s) {
    s->add_option("--matrix", c.matrix, "generator spec (diag:1,4,9, random_sectorial:8,1.0,100,42, ...) or JSON file");
    s->add_option("--function", c.functions, "catalog name (power:0.5, log1p, psi:2, ...) or JSON file; repeatable");
    s->add_option("--calculus", c.calculus, "hol|stieltjes|stieltjes-ext|hirsch|hp|hp-ext|oracle");
    s->add_option("--tol", c.tol, "tolerance");
    s->add_option("--seed", c.seed, "seed for random_sectorial specs given without one");
    s->add_option("--report", c.report, "JSON report path");
    s->add_option("--nodes", c.nodes, "quadrature node budget");
  };
  auto* eval = app.add_subcommand("eval", "evaluate f(A) with one calculus");
  common(eval);
  auto* check = app.add_subcommand("check", "run one theorem check");
  common(check);
  check->add_option("--check", c.check, "check kind (default: product_formula for two functions, consistency for one)");
  check->add_option("--param", c.params, "numeric check parameter; repeatable");
  auto* suite = app.add_subcommand("suite", "run a check suite");
  common(suite);
  suite->add_option("--config", c.suite_file, "suite JSON file (default: built-in suite)");
  suite->add_option("--threads", c.threads, "worker threads (default: hardware concurrency)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  c.mode = app.get_subcommands().front()->get_name();
  return run(c, out, err);
}

}  // namespace sectorial::cli
