#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "sectorial/cli/app.hpp"

using namespace sectorial;
using io::json;

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "sectorial_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Run {
  int code;
  std::string out, err;
};

Run run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "sectorial_calc");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  int code = cli::main(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void expect_same_function(const FunctionSpec& a, const FunctionSpec& b) {
  EXPECT_EQ(a.label, b.label);
  EXPECT_EQ(std::string(a.kind()), std::string(b.kind()));
  EXPECT_EQ(io::to_json(a).dump(), io::to_json(b).dump());
  for (cplx z : oracle::standard_grid()) {
    if (z.imag() == 0.0 && z.real() < 0.0) continue;
    cplx va, vb;
    try {
      va = eval(a, z, 1e-12);
    } catch (const Error&) {
      continue;
    }
    vb = eval(b, z, 1e-12);
    EXPECT_EQ(va, vb) << z;
  }
}

}  // namespace

// ---------------------------------------------------------------- serialization

TEST(Serialize, MatrixRoundTripIsBitExact) {
  for (const char* spec : {"diag:1,2+i", "random_sectorial:6,1.0,100,5", "shift_generator:8", "zero_padded:2,jordan:1,3"}) {
    const cmat A = gen::generate(spec);
    const json j = io::to_json(A);
    EXPECT_EQ(j["rows"], A.rows());
    const cmat B = io::matrix_from_json(json::parse(j.dump()));
    EXPECT_EQ(A, B) << spec;
  }
}

TEST(Serialize, MatrixLayoutIsRowMajorPairs) {
  cmat A(1, 2);
  A << cplx(1, 2), cplx(3, -4);
  EXPECT_EQ(io::to_json(A).dump(), R"({"cols":2,"data":[[1.0,2.0],[3.0,-4.0]],"rows":1})");
}

TEST(Serialize, MatrixRejectsWrongEntryCount) {
  json j = {{"rows", 2}, {"cols", 2}, {"data", json::array({json::array({1.0, 0.0})})}};
  EXPECT_THROW(io::matrix_from_json(j), Error);
}

TEST(Serialize, CatalogFunctionsRoundTrip) {
  for (const char* name : {"power:0.5", "power:1.5", "power:2", "log1p", "one_minus_exp", "psi", "psi:3", "tau", "e3",
                           "e3:2", "identity", "constant:2,1"}) {
    const FunctionSpec f = parse_function(name);
    expect_same_function(f, io::function_from_json(json::parse(io::to_json(f).dump())));
  }
}

TEST(Serialize, DerivedRepresentationsRoundTrip) {
  std::vector<FunctionSpec> fs{
      make_spec(stieltjes_product_ex(catalog("power", {0.5}), catalog("power", {1.5})).rep),
      make_spec(sum_rep(catalog("power", {0.5}), catalog("log1p"))),
      make_spec(resolvent_regularized(*catalog_bernstein(catalog("power", {0.5})))),
      tilde_transform(catalog("log1p")),
  };
  for (const auto& f : fs) expect_same_function(f, io::function_from_json(json::parse(io::to_json(f).dump())));
}

TEST(Serialize, FunctionShorthands) {
  expect_same_function(io::function_from_json(json("power:0.5")), catalog("power", {0.5}));
  expect_same_function(io::function_from_json(json{{"catalog", "psi"}, {"params", {2}}}), catalog("psi", {2}));
  EXPECT_THROW(io::function_from_json(json{{"kind", "nonsense"}}), Error);
}

TEST(Serialize, UnboundedSupportIsNull) {
  const json j = io::to_json(catalog("power", {0.5}));
  EXPECT_TRUE(j["mu"]["densities"][0]["hi"].is_null());
}

TEST(Serialize, ReportRoundTrip) {
  SuiteResult s = run_suite(SuiteConfig{"t", {{"product_formula", {"psi", "psi"}, "diag:1,2", {}, "stieltjes", 1e-12},
                                              {"w_zero", {}, "", {}}, {"ifif", {}, "diag:1", {}},
                                              {"consistency", {"psi"}, "jordan:0,2", {}}},
                                       {}});
  const json j = io::to_json(s);
  const SuiteResult back = io::suite_from_json(json::parse(j.dump()));
  EXPECT_EQ(io::to_json(back).dump(), j.dump());
  EXPECT_EQ(back.reports.size(), 4u);
  EXPECT_TRUE(j["checks"][3]["residual_rel"].is_null());
  EXPECT_EQ(j["checks"][3]["diagnostics"]["error_code"], "NotSectorial");
  EXPECT_EQ(j["checks"][2]["status"], kOutOfScope);
}

// ---------------------------------------------------------------- command line

TEST(Cli, EvalSquareRoot) {
  auto report = scratch("eval.json");
  auto r = run_args({"eval", "--matrix", "diag:1,4,9", "--function", "power:0.5", "--calculus", "stieltjes-ext",
                     "--tol", "1e-8", "--report", report.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  const json j = json::parse(slurp(report));
  const cmat V = io::matrix_from_json(j["result"]["value"]);
  EXPECT_LT((V - gen::diag({1.0, 2.0, 3.0})).norm(), 1e-8);
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_FALSE(fs::exists(report.string() + ".tmp"));
}

TEST(Cli, EvalReadsMatrixAndFunctionFiles) {
  auto mpath = scratch("m.json"), fpath = scratch("f.json");
  std::ofstream(mpath) << io::to_json(gen::generate("laplacian1d:3")).dump();
  std::ofstream(fpath) << io::to_json(catalog("psi")).dump();
  auto r = run_args({"eval", "--matrix", mpath.string(), "--function", fpath.string(), "--calculus", "oracle"});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST(Cli, CheckProductFormula) {
  auto r = run_args({"check", "--matrix", "random_sectorial:8,1.0,100,42", "--function", "power:0.5", "--function",
                     "log1p", "--tol", "1e-6"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}

TEST(Cli, CheckByKindWithParams) {
  auto r = run_args({"check", "--check", "bernstein_counterexample", "--param", "0.5", "--param", "0.5"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  auto fail = run_args({"check", "--check", "range_condition", "--matrix", "diag:0,1", "--function", "e3", "--function",
                        "constant", "--function", "e3", "--param", "1"});
  EXPECT_EQ(fail.code, 1) << fail.out << fail.err;
}

TEST(Cli, SeedCompletesRandomSpecs) {
  EXPECT_EQ(cli::detail::with_seed("random_sectorial:4,1.0,10", 7), "random_sectorial:4,1.0,10,7");
  EXPECT_EQ(cli::detail::with_seed("random_sectorial:4,1.0,10,3", 7), "random_sectorial:4,1.0,10,3");
  EXPECT_EQ(cli::detail::with_seed("zero_padded:1,random_sectorial:4,1.0,10", 7),
            "zero_padded:1,random_sectorial:4,1.0,10,7");
  auto a = scratch("seed_a.json"), b = scratch("seed_b.json");
  run_args({"eval", "--matrix", "random_sectorial:4,1.0,10", "--seed", "9", "--function", "psi", "--report", a.string()});
  run_args({"eval", "--matrix", "random_sectorial:4,1.0,10,9", "--function", "psi", "--report", b.string()});
  EXPECT_EQ(json::parse(slurp(a))["fixture_hash"], json::parse(slurp(b))["fixture_hash"]);
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run_args({"eval", "--matrix", "nope:1", "--function", "psi"}).code, 2);
  EXPECT_EQ(run_args({"eval", "--matrix", "diag:1", "--function", "nope"}).code, 2);
  EXPECT_EQ(run_args({"eval", "--matrix", "diag:1", "--function", "psi", "--calculus", "magic"}).code, 2);
  EXPECT_EQ(run_args({"eval", "--matrix", "diag:1", "--function", "psi", "--tol", "-1"}).code, 2);
  EXPECT_EQ(run_args({"eval", "--unknown-flag"}).code, 2);
  EXPECT_EQ(run_args({}).code, 2);
}

TEST(Cli, EngineErrorsExitOneWithErrorObject) {
  auto report = scratch("err.json");
  auto r = run_args({"eval", "--matrix", "jordan:0,2", "--function", "psi", "--report", report.string()});
  EXPECT_EQ(r.code, 1);
  const json j = json::parse(slurp(report));
  EXPECT_EQ(j["error"]["code"], "NotSectorial");
  EXPECT_FALSE(j["passed"].get<bool>());
}

TEST(Cli, CustomSuiteAndDeterminism) {
  auto cfg = scratch("suite.json");
  std::ofstream(cfg) << R"({"name": "mini", "checks": [
    {"kind": "product_formula", "functions": ["power:0.5", "power:0.5"], "matrix": "diag:1,4,9"},
    {"kind": "quotient_diagram", "functions": ["psi"], "matrix": "diag:0,1", "tol": 1e-10},
    {"kind": "consistency", "functions": ["log1p"], "matrix": "random_sectorial:5,1.0,10,2", "calculus": "stieltjes-ext"},
    {"kind": "fggf", "matrix": "laplacian1d:3"}]})";
  auto a = scratch("suite_a.json"), b = scratch("suite_b.json");
  auto r1 = run_args({"suite", "--config", cfg.string(), "--threads", "3", "--report", a.string()});
  auto r2 = run_args({"suite", "--config", cfg.string(), "--threads", "1", "--report", b.string()});
  EXPECT_EQ(r1.code, 0) << r1.out << r1.err;
  EXPECT_EQ(r2.code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  const json j = json::parse(slurp(a));
  EXPECT_EQ(j["suite"], "mini");
  EXPECT_EQ(j["checks"].size(), 4u);
  EXPECT_EQ(j["checks"][3]["status"], kOutOfScope);
  EXPECT_EQ(j["fixture_hashes"].size(), 4u);
}

TEST(Cli, SuiteWithFailingCheckExitsOne) {
  auto cfg = scratch("bad_suite.json");
  std::ofstream(cfg) << R"({"checks": [{"kind": "consistency", "functions": ["psi"], "matrix": "jordan:0,2"}]})";
  auto r = run_args({"suite", "--config", cfg.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("ERROR"), std::string::npos);
}
