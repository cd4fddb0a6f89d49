#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adml/dgp.hpp"
#include "adml/estimators.hpp"
#include "adml/simulation.hpp"

namespace adml::cli {

// Invalid configuration or command-line usage; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One simulation study: the grid gammas x outcome_forms x sample_sizes, every
// cell run with the same master seed and estimator list.
struct ExperimentConfig {
  std::vector<double> gammas = {0.5};
  std::vector<sim::OutcomeForm> outcome_forms = {sim::OutcomeForm::linear};
  bool perturbed = false;
  double noise_variance = 0.5;
  std::vector<std::size_t> sample_sizes = {1000};
  std::vector<estimators::Estimator> estimators = {
      estimators::Estimator::plug_in_admle, estimators::Estimator::partially_linear_admle,
      estimators::Estimator::semiparametric_intercept, estimators::Estimator::aipw};
  std::size_t replications = 500;
  std::uint64_t seed = 20240601;
  double alpha = 0.05;

  // basis
  std::size_t knots_per_covariate = 0;  // 0 follows the dictionary schedule
  std::size_t propensity_knots = 0;     // 0 uses the outcome knot count
  std::map<std::size_t, std::size_t> dictionary;  // n -> k overrides

  // nuisance
  int cv_folds = 10;
  std::uint64_t nuisance_seed = 20240601;
  std::size_t lambda_count = 100;
  double lambda_ratio = 1e-4;
  std::vector<double> cutoff_grid = {1e-5, 1e-4, 1e-3, 0.005, 0.01, 0.02, 0.05, 0.1};
  std::vector<double> cate_penalty_ratios = {0.25, 1.0, 4.0};

  // output
  std::string results_path;       // empty writes to stdout
  std::string replications_path;  // empty skips per-replication output

  bool operator==(const ExperimentConfig&) const = default;

  // Throws UsageError naming the offending field.
  void validate() const;

  sim::SimulationConfig simulation_config(unsigned threads) const;
};

// Parses the YAML text form. Unknown keys and type errors raise UsageError
// with the line number and field path.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical text form: every key, fixed order, shortest round-trip numbers.
std::string serialize_config(const ExperimentConfig& config);

}  // namespace adml::cli
