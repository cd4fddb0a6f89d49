#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "adml/cli/commands.hpp"
#include "adml/cli/config.hpp"
#include "adml/cli/csv.hpp"

using namespace adml;
using namespace adml::cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "adml");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  const char* env = std::getenv("ADML_TEST_TMP");
  const fs::path dir = env != nullptr ? fs::path(env) : fs::temp_directory_path() / "adml_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto path = scratch() / name;
  std::ofstream(path, std::ios::binary) << text;
  return path.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::size_t data_rows(const std::string& csv) {
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n' ? 1 : 0;
  return lines - 1;
}

const char* kSmallConfig = R"(dgp:
  gammas: [0.5]
  outcome_forms: [linear]
sample_sizes: [200]
estimators: [aipw]
replications: 1
seed: 11
basis:
  propensity_knots: 3
  dictionary: {200: 24}
)";

std::vector<std::string> csv_row(const std::string& csv, std::size_t row) {
  std::istringstream in(csv);
  std::string line;
  for (std::size_t k = 0; k <= row; ++k) std::getline(in, line);
  return split_csv_line(line);
}

}  // namespace

TEST_CASE("config round-trips through its canonical form") {
  ExperimentConfig config;
  config.gammas = {0.5, 2.0};
  config.outcome_forms = {sim::OutcomeForm::linear, sim::OutcomeForm::nonlinear};
  config.sample_sizes = {500, 2000};
  config.alpha = 0.1;
  config.lambda_ratio = 1.0 / 3.0;
  config.dictionary = {{500, 80}, {2000, 608}};
  config.results_path = "out/results.csv";
  const auto text = serialize_config(config);
  const auto parsed = parse_config(text);
  CHECK(parsed == config);
  CHECK(serialize_config(parsed) == text);
  CHECK(parse_config("") == ExperimentConfig{});
  CHECK(parse_config(serialize_config(ExperimentConfig{})) == ExperimentConfig{});
}

TEST_CASE("config rejects unknown keys and bad values with line and field") {
  try {
    parse_config("replications: 5\ndgp:\n  gamas: [1]\n");
    FAIL("expected a usage error");
  } catch (const UsageError& e) {
    const std::string what = e.what();
    CHECK(what.find("line 3") != std::string::npos);
    CHECK(what.find("dgp.gamas") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("replications: -1\n"), UsageError);
  CHECK_THROWS_AS(parse_config("alpha: 1.5\n"), UsageError);
  CHECK_THROWS_AS(parse_config("estimators: [tmle]\n"), UsageError);
  CHECK_THROWS_AS(parse_config("dgp:\n  outcome_forms: [cubic]\n"), UsageError);
  CHECK_THROWS_AS(parse_config("seed: [1, 2]\n"), UsageError);

  const auto bad = write_file("bad.yaml", "colour: blue\n");
  const auto result = invoke({"config", bad});
  CHECK(result.code == kUsageError);
  CHECK(result.err.find("colour") != std::string::npos);
  CHECK(invoke({"simulate", "--config", bad}).code == kUsageError);
}

TEST_CASE("config subcommand prints the canonical form") {
  const auto path = write_file("small.yaml", kSmallConfig);
  const auto result = invoke({"config", path});
  REQUIRE(result.code == kSuccess);
  CHECK(parse_config(result.out) == load_config(path));
  CHECK(invoke({"frobnicate"}).code == kUsageError);
  CHECK(invoke({}).code == kUsageError);
}

TEST_CASE("simulate with one cell and one replication writes one row") {
  const auto path = write_file("small.yaml", kSmallConfig);
  const auto records = (scratch() / "records.csv").string();
  const auto result = invoke({"simulate", "--config", path, "--records-out", records});
  REQUIRE(result.code == kSuccess);
  CHECK(data_rows(result.out) == 1);
  std::istringstream in(result.out);
  const auto metrics = read_metrics(in);
  REQUIRE(metrics.rows.size() == 1);
  CHECK(metrics.rows[0].estimator == estimators::Estimator::aipw);
  CHECK(metrics.rows[0].n == 200);
  CHECK(metrics.rows[0].se == 0.0);
  CHECK(metrics.rows[0].replications + metrics.rows[0].failures == 1);
  CHECK(data_rows(read_file(records)) == 1);

  std::ostringstream again;
  for (const auto& row : metrics.rows) write_metrics_row(again, row);
  CHECK(std::string(kMetricsHeader) + "\n" + again.str() == result.out);
}

TEST_CASE("simulate grid product and byte-identical reruns") {
  const auto path = write_file("small.yaml", kSmallConfig);
  const auto out_a = (scratch() / "grid_a.csv").string();
  const auto out_b = (scratch() / "grid_b.csv").string();
  const std::vector<std::string> grid{"simulate", "--config", path,   "--gamma", "0",
                                      "0.5",      "--n",      "150",  "200",     "--estimator",
                                      "aipw",     "semiparametric_intercept",    "--reps", "2"};
  auto first = grid;
  first.insert(first.end(), {"--out", out_a});
  auto second = grid;
  second.insert(second.end(), {"--out", out_b});
  REQUIRE(invoke(first).code == kSuccess);
  REQUIRE(invoke(second).code == kSuccess);
  const auto text = read_file(out_a);
  CHECK(data_rows(text) == 2 * 2 * 2);
  CHECK(text == read_file(out_b));
  CHECK(csv_row(text, 1)[2] == "0");
  CHECK(csv_row(text, 8)[2] == "0.5");
}

TEST_CASE("simulate override validation") {
  const auto path = write_file("small.yaml", kSmallConfig);
  CHECK(invoke({"simulate", "--config", path, "--estimator", "tmle"}).code == kUsageError);
  CHECK(invoke({"simulate", "--config", path, "--outcome-form", "cubic"}).code == kUsageError);
  CHECK(invoke({"simulate", "--config", path, "--alpha", "0"}).code == kUsageError);
  CHECK(invoke({"simulate", "--config", path, "--reps", "x"}).code == kUsageError);
}

TEST_CASE("estimate on a two-point toy dataset with a known propensity") {
  const auto data = write_file("toy.csv", "W1,A,Y\n0.1,1,3\n-0.2,0,1\n");
  const auto result = invoke({"estimate", "--data", data, "--estimator", "aipw", "--propensity", "0.5"});
  REQUIRE(result.code == kSuccess);
  const auto row = csv_row(result.out, 1);
  REQUIRE(row.size() == 9);
  CHECK(row[0] == "aipw");
  CHECK(row[1] == "2");
  // mu(1) = 3 and mu(0) = 1 from the two cells, residuals vanish, so psi = 2 and sigma = 0.
  CHECK(std::stod(row[2]) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(std::stod(row[3])) <= 1e-12);
  CHECK(std::stod(row[4]) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::stod(row[5]) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(row[6] == "0.050000000000000003");
  CHECK(row[7] == "0");
  CHECK(row[8] == "0");
}

TEST_CASE("estimate reports degenerate designs and malformed input") {
  const auto treated = write_file("treated.csv", "W1,W2,A,Y\n0.1,0.2,1,3\n0.3,-0.1,1,2\n-0.5,0.4,1,1\n");
  const auto degenerate = invoke({"estimate", "--data", treated, "--estimator", "semiparametric_intercept"});
  CHECK(degenerate.code == kRuntimeFailure);
  CHECK(degenerate.err.find("constant") != std::string::npos);

  const auto missing = write_file("missing.csv", "W1,A,Y\n0.1,1,3\n0.2,0,\n");
  const auto m = invoke({"estimate", "--data", missing});
  CHECK(m.code == kUsageError);
  CHECK(m.err.find("row 3") != std::string::npos);

  const auto nonbinary = write_file("nonbinary.csv", "W1,A,Y\n0.1,1,3\n0.2,2,1\n");
  const auto nb = invoke({"estimate", "--data", nonbinary});
  CHECK(nb.code == kUsageError);
  CHECK(nb.err.find("row 3") != std::string::npos);

  const auto header = write_file("header.csv", "X1,A,Y\n0.1,1,3\n");
  CHECK(invoke({"estimate", "--data", header}).code == kUsageError);
  CHECK(invoke({"estimate", "--data", (scratch() / "absent.csv").string()}).code == kUsageError);
  CHECK(invoke({"estimate"}).code == kUsageError);
}

TEST_CASE("smaller alpha gives a wider interval on the same data and seed") {
  const auto data = (scratch() / "sample.csv").string();
  REQUIRE(invoke({"dgp-sample", "--n", "300", "--seed", "5", "--out", data}).code == kSuccess);
  const auto wide = invoke({"estimate", "--data", data, "--knots-per-cov", "3", "--alpha", "0.05"});
  const auto narrow = invoke({"estimate", "--data", data, "--knots-per-cov", "3", "--alpha", "0.1"});
  REQUIRE(wide.code == kSuccess);
  REQUIRE(narrow.code == kSuccess);
  for (std::size_t k = 1; k <= 4; ++k) {
    const auto w = csv_row(wide.out, k);
    const auto n = csv_row(narrow.out, k);
    CHECK(w[0] == n[0]);
    CHECK(w[2] == n[2]);
    CHECK(std::stod(n[5]) - std::stod(n[4]) < std::stod(w[5]) - std::stod(w[4]));
    if (k <= 2) CHECK(std::stoul(w[7]) >= 1);
  }
}

TEST_CASE("oracle diagnostics") {
  const auto flat = invoke({"oracle", "--gamma", "0", "--mc-size", "20000", "--seed", "3"});
  REQUIRE(flat.code == kSuccess);
  CHECK(flat.out.find("\noverlap_constant,0.5,,\n") != std::string::npos);

  const std::vector<std::string> args{"oracle", "--mc-size", "20000", "--seed", "4", "--basis", "oracle"};
  const auto a = invoke(args);
  const auto b = invoke(args);
  REQUIRE(a.code == kSuccess);
  CHECK(a.out == b.out);
  std::istringstream in(a.out);
  std::string line;
  bool seen = false;
  while (std::getline(in, line)) {
    const auto f = split_csv_line(line);
    if (f[0] == "pl_oracle_bias" || f[0] == "plug_in_oracle_bias") {
      CHECK(std::abs(std::stod(f[1])) <= 1e-8);
      seen = true;
    }
    if (f[0] == "riesz_residual_norm") CHECK(std::stod(f[1]) <= 1e-6);
  }
  CHECK(seen);
  CHECK(invoke({"oracle", "--basis", "spline"}).code == kUsageError);
  CHECK(invoke({"oracle", "--perturbed"}).code == kUsageError);
}

TEST_CASE("dgp-sample writes n rows in fixed column order and round-trips") {
  const auto a = invoke({"dgp-sample", "--n", "25", "--seed", "9", "--gamma", "1"});
  const auto b = invoke({"dgp-sample", "--n", "25", "--seed", "9", "--gamma", "1"});
  REQUIRE(a.code == kSuccess);
  CHECK(a.out == b.out);
  CHECK(a.out.rfind("W1,W2,W3,W4,A,Y\n", 0) == 0);
  CHECK(data_rows(a.out) == 25);

  std::istringstream in(a.out);
  const auto data = read_dataset(in);
  CHECK(data.size() == 25);
  CHECK(data.dimension() == 4);
  const auto expected = sim::sample_dgp([] {
    sim::DgpSpec s;
    s.gamma = 1.0;
    return s;
  }(), 25, 9);
  CHECK(data.W == expected.W);
  CHECK(data.A == expected.A);
  CHECK(data.Y == expected.Y);
  std::ostringstream again;
  write_dataset(again, data);
  CHECK(again.str() == a.out);

  const auto file = (scratch() / "roundtrip.csv").string();
  REQUIRE(invoke({"dgp-sample", "--n", "120", "--seed", "2", "--out", file}).code == kSuccess);
  CHECK(invoke({"estimate", "--data", file, "--knots-per-cov", "2"}).code == kSuccess);
  CHECK(invoke({"dgp-sample", "--n", "0"}).code == kUsageError);
}

TEST_CASE("thread budget follows the environment") {
  ::setenv("ADML_THREADS", "3", 1);
  CHECK(thread_budget() == 3);
  ::setenv("ADML_THREADS", "zero", 1);
  CHECK_THROWS_AS(thread_budget(), UsageError);
  ::unsetenv("ADML_THREADS");
  CHECK(thread_budget() >= 1);
}
