#include "adml/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace adml::cli {

namespace {

std::string where(const YAML::Node& node, const std::string& field) {
  const auto mark = node.Mark();
  if (mark.line < 0) return "field " + field;
  return "line " + std::to_string(mark.line + 1) + ", field " + field;
}

[[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& what) {
  throw UsageError(where(node, field) + ": " + what);
}

void check_keys(const YAML::Node& map, const std::string& section, const std::set<std::string>& allowed) {
  if (!map.IsMap()) fail(map, section.empty() ? "<root>" : section, "expected a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      fail(kv.first, section.empty() ? key : section + "." + key, "unknown key");
    }
  }
}

template <class T>
T scalar(const YAML::Node& node, const std::string& field, const char* expected) {
  if (!node.IsScalar()) fail(node, field, std::string("expected ") + expected);
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(node, field, std::string("expected ") + expected + ", got '" + node.Scalar() + "'");
  }
}

double number(const YAML::Node& node, const std::string& field) {
  return scalar<double>(node, field, "a number");
}

std::uint64_t count(const YAML::Node& node, const std::string& field) {
  const auto text = node.IsScalar() ? node.Scalar() : std::string{};
  if (!text.empty() && text[0] == '-') fail(node, field, "expected a nonnegative integer");
  return scalar<std::uint64_t>(node, field, "a nonnegative integer");
}

template <class F>
void each(const YAML::Node& node, const std::string& field, F&& f) {
  if (!node.IsSequence()) fail(node, field, "expected a list");
  for (std::size_t k = 0; k < node.size(); ++k) f(node[k], field + "[" + std::to_string(k) + "]");
}

std::string shortest(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

template <class T, class F>
std::string flow_list(const std::vector<T>& values, F&& format) {
  std::string out = "[";
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k > 0) out += ", ";
    out += format(values[k]);
  }
  return out + "]";
}

}  // namespace

void ExperimentConfig::validate() const {
  if (gammas.empty()) throw UsageError("field dgp.gammas: at least one value required");
  for (double g : gammas) {
    if (!std::isfinite(g)) throw UsageError("field dgp.gammas: values must be finite");
  }
  if (outcome_forms.empty()) throw UsageError("field dgp.outcome_forms: at least one value required");
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
    throw UsageError("field dgp.noise_variance: must be positive");
  }
  if (sample_sizes.empty()) throw UsageError("field sample_sizes: at least one value required");
  for (auto n : sample_sizes) {
    if (n == 0) throw UsageError("field sample_sizes: values must be at least 1");
  }
  if (estimators.empty()) throw UsageError("field estimators: at least one estimator required");
  if (replications == 0) throw UsageError("field replications: must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("field alpha: must lie in (0, 1)");
  for (const auto& [n, k] : dictionary) {
    if (n == 0 || k == 0) throw UsageError("field basis.dictionary: sizes must be positive");
  }
  if (cv_folds < 2) throw UsageError("field nuisance.cv_folds: must be at least 2");
  if (lambda_count == 0) throw UsageError("field nuisance.lambda_count: must be at least 1");
  if (!(lambda_ratio > 0.0 && lambda_ratio < 1.0)) {
    throw UsageError("field nuisance.lambda_ratio: must lie in (0, 1)");
  }
  if (cutoff_grid.empty()) throw UsageError("field nuisance.cutoff_grid: at least one value required");
  for (std::size_t k = 0; k < cutoff_grid.size(); ++k) {
    if (!(cutoff_grid[k] > 0.0 && cutoff_grid[k] < 0.5)) {
      throw UsageError("field nuisance.cutoff_grid: values must lie in (0, 0.5)");
    }
    if (k > 0 && !(cutoff_grid[k] > cutoff_grid[k - 1])) {
      throw UsageError("field nuisance.cutoff_grid: values must be strictly ascending");
    }
  }
  if (cate_penalty_ratios.empty()) {
    throw UsageError("field nuisance.cate_penalty_ratios: at least one value required");
  }
  for (double r : cate_penalty_ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) throw UsageError("field nuisance.cate_penalty_ratios: values must be positive");
  }
}

sim::SimulationConfig ExperimentConfig::simulation_config(unsigned threads) const {
  sim::SimulationConfig out;
  out.alpha = alpha;
  out.threads = threads;
  out.dictionary_overrides = dictionary;
  out.knots_per_covariate = knots_per_covariate;
  out.propensity_knots = propensity_knots;
  out.nuisance.cv_folds = cv_folds;
  out.nuisance.seed = nuisance_seed;
  out.nuisance.lambda_count = lambda_count;
  out.nuisance.lambda_ratio = lambda_ratio;
  out.nuisance.cutoff_grid = cutoff_grid;
  out.nuisance.cate_penalty_ratios = cate_penalty_ratios;
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw UsageError("line " + std::to_string(e.mark.line + 1) + ": malformed config: " + e.msg);
  }
  ExperimentConfig c;
  if (root.IsNull()) {
    c.validate();
    return c;
  }
  check_keys(root, "", {"dgp", "sample_sizes", "estimators", "replications", "seed", "alpha", "basis",
                        "nuisance", "output"});

  if (const auto dgp = root["dgp"]) {
    check_keys(dgp, "dgp", {"gammas", "outcome_forms", "perturbed", "noise_variance"});
    if (const auto v = dgp["gammas"]) {
      c.gammas.clear();
      each(v, "dgp.gammas", [&](const YAML::Node& x, const std::string& f) { c.gammas.push_back(number(x, f)); });
    }
    if (const auto v = dgp["outcome_forms"]) {
      c.outcome_forms.clear();
      each(v, "dgp.outcome_forms", [&](const YAML::Node& x, const std::string& f) {
        const auto form = sim::parse_outcome_form(scalar<std::string>(x, f, "linear or nonlinear"));
        if (!form) fail(x, f, "expected linear or nonlinear, got '" + x.Scalar() + "'");
        c.outcome_forms.push_back(*form);
      });
    }
    if (const auto v = dgp["perturbed"]) c.perturbed = scalar<bool>(v, "dgp.perturbed", "true or false");
    if (const auto v = dgp["noise_variance"]) c.noise_variance = number(v, "dgp.noise_variance");
  }
  if (const auto v = root["sample_sizes"]) {
    c.sample_sizes.clear();
    each(v, "sample_sizes", [&](const YAML::Node& x, const std::string& f) { c.sample_sizes.push_back(count(x, f)); });
  }
  if (const auto v = root["estimators"]) {
    c.estimators.clear();
    each(v, "estimators", [&](const YAML::Node& x, const std::string& f) {
      const auto e = estimators::parse_estimator(scalar<std::string>(x, f, "an estimator name"));
      if (!e) fail(x, f, "unknown estimator '" + x.Scalar() + "'");
      c.estimators.push_back(*e);
    });
  }
  if (const auto v = root["replications"]) c.replications = count(v, "replications");
  if (const auto v = root["seed"]) c.seed = count(v, "seed");
  if (const auto v = root["alpha"]) c.alpha = number(v, "alpha");

  if (const auto basis = root["basis"]) {
    check_keys(basis, "basis", {"knots_per_covariate", "propensity_knots", "dictionary"});
    if (const auto v = basis["knots_per_covariate"]) c.knots_per_covariate = count(v, "basis.knots_per_covariate");
    if (const auto v = basis["propensity_knots"]) c.propensity_knots = count(v, "basis.propensity_knots");
    if (const auto v = basis["dictionary"]) {
      if (!v.IsMap()) fail(v, "basis.dictionary", "expected a mapping from n to dictionary size");
      for (const auto& kv : v) {
        const auto n = count(kv.first, "basis.dictionary");
        c.dictionary[n] = count(kv.second, "basis.dictionary." + kv.first.Scalar());
      }
    }
  }
  if (const auto nuisance = root["nuisance"]) {
    check_keys(nuisance, "nuisance",
               {"cv_folds", "seed", "lambda_count", "lambda_ratio", "cutoff_grid", "cate_penalty_ratios"});
    if (const auto v = nuisance["cv_folds"]) c.cv_folds = scalar<int>(v, "nuisance.cv_folds", "an integer");
    if (const auto v = nuisance["seed"]) c.nuisance_seed = count(v, "nuisance.seed");
    if (const auto v = nuisance["lambda_count"]) c.lambda_count = count(v, "nuisance.lambda_count");
    if (const auto v = nuisance["lambda_ratio"]) c.lambda_ratio = number(v, "nuisance.lambda_ratio");
    if (const auto v = nuisance["cutoff_grid"]) {
      c.cutoff_grid.clear();
      each(v, "nuisance.cutoff_grid",
           [&](const YAML::Node& x, const std::string& f) { c.cutoff_grid.push_back(number(x, f)); });
    }
    if (const auto v = nuisance["cate_penalty_ratios"]) {
      c.cate_penalty_ratios.clear();
      each(v, "nuisance.cate_penalty_ratios",
           [&](const YAML::Node& x, const std::string& f) { c.cate_penalty_ratios.push_back(number(x, f)); });
    }
  }
  if (const auto output = root["output"]) {
    check_keys(output, "output", {"results", "replications"});
    if (const auto v = output["results"]) c.results_path = scalar<std::string>(v, "output.results", "a path");
    if (const auto v = output["replications"]) {
      c.replications_path = scalar<std::string>(v, "output.replications", "a path");
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  const auto num = [](double v) { return shortest(v); };
  const auto whole = [](auto v) { return std::to_string(v); };
  std::ostringstream out;
  out << "dgp:\n"
      << "  gammas: " << flow_list(c.gammas, num) << "\n"
      << "  outcome_forms: "
      << flow_list(c.outcome_forms, [](sim::OutcomeForm f) { return std::string(sim::to_string(f)); }) << "\n"
      << "  perturbed: " << (c.perturbed ? "true" : "false") << "\n"
      << "  noise_variance: " << num(c.noise_variance) << "\n"
      << "sample_sizes: " << flow_list(c.sample_sizes, whole) << "\n"
      << "estimators: "
      << flow_list(c.estimators, [](estimators::Estimator e) { return std::string(estimators::to_string(e)); })
      << "\n"
      << "replications: " << c.replications << "\n"
      << "seed: " << c.seed << "\n"
      << "alpha: " << num(c.alpha) << "\n"
      << "basis:\n"
      << "  knots_per_covariate: " << c.knots_per_covariate << "\n"
      << "  propensity_knots: " << c.propensity_knots << "\n"
      << "  dictionary: {";
  bool first = true;
  for (const auto& [n, k] : c.dictionary) {
    out << (first ? "" : ", ") << n << ": " << k;
    first = false;
  }
  out << "}\n"
      << "nuisance:\n"
      << "  cv_folds: " << c.cv_folds << "\n"
      << "  seed: " << c.nuisance_seed << "\n"
      << "  lambda_count: " << c.lambda_count << "\n"
      << "  lambda_ratio: " << num(c.lambda_ratio) << "\n"
      << "  cutoff_grid: " << flow_list(c.cutoff_grid, num) << "\n"
      << "  cate_penalty_ratios: " << flow_list(c.cate_penalty_ratios, num) << "\n"
      << "output:\n"
      << "  results: " << quoted(c.results_path) << "\n"
      << "  replications: " << quoted(c.replications_path) << "\n";
  return out.str();
}

}  // namespace adml::cli
