#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adml/dgp.hpp"
#include "adml/estimators.hpp"
#include "adml/nuisance.hpp"

namespace adml::sim {

// Dictionary size k for the outcome regression at sample size n:
// 500 -> 80, 1000 -> 400, 2000 -> 608, 3000 -> 608, 4000 -> 800, 5000 -> 800,
// nearest scheduled n otherwise (ties to the smaller n).
std::size_t dictionary_size(std::size_t n);

// Knots per covariate and block so that two additive blocks over d
// covariates hold about k hinge columns: round(k / (2 d)), at least 1.
std::size_t knots_per_covariate(std::size_t dictionary_size, std::size_t dimension);

struct SimulationConfig {
  nuisance::NuisanceConfig nuisance;  // knot counts are filled per n
  double alpha = 0.05;
  unsigned threads = 1;
  // n -> dictionary size k, replacing the default schedule.
  std::map<std::size_t, std::size_t> dictionary_overrides;
  // Knots per covariate for every n; 0 follows the dictionary schedule.
  std::size_t knots_per_covariate = 0;
  // Propensity knots per covariate; 0 uses the outcome knot count.
  std::size_t propensity_knots = 0;

  bool operator==(const SimulationConfig&) const = default;
};

nuisance::NuisanceConfig nuisance_config_for(const SimulationConfig& config, std::size_t n,
                                             std::size_t dimension);

struct EstimateSummary {
  double psi = 0.0;
  double sigma = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
};

struct ReplicationRecord {
  std::uint64_t seed = 0;
  double treated_fraction = 0.0;
  // One slot per requested estimator; empty when that estimator failed.
  std::vector<std::optional<EstimateSummary>> estimates;
  std::vector<std::string> errors;
};

struct MetricsRow {
  estimators::Estimator estimator = estimators::Estimator::aipw;
  std::size_t n = 0;
  double gamma = 0.0;
  OutcomeForm outcome_form = OutcomeForm::linear;
  bool perturbed = false;
  double bias = 0.0;
  double se = 0.0;
  double rmse = 0.0;
  double coverage = 0.0;
  double mean_ci_width = 0.0;
  std::size_t replications = 0;  // replications that produced an estimate
  std::size_t failures = 0;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
};

struct ReplicationResult {
  MetricsTable table;
  std::vector<ReplicationRecord> records;
  double truth = 0.0;  // exact_ate of the sampled spec
};

// bias = mean(psi) - truth, se = population sd of psi (divisor R), so that
// rmse^2 = bias^2 + se^2 exactly; coverage counts intervals containing truth.
MetricsRow aggregate(const std::vector<std::optional<EstimateSummary>>& estimates, double truth);

// One replication: sample, fit nuisances once, run every estimator.
ReplicationRecord run_replication(const DgpSpec& spec, std::size_t n,
                                  const std::vector<estimators::Estimator>& which,
                                  std::uint64_t seed, const SimulationConfig& config);

// Replication r uses split_seed(master_seed, r). A perturbed spec is
// re-targeted to n before sampling. Results are reduced in replication order,
// independent of the thread count.
ReplicationResult run_replications(const DgpSpec& spec, std::size_t n,
                                   const std::vector<estimators::Estimator>& which, std::size_t R,
                                   std::uint64_t master_seed, const SimulationConfig& config);

}  // namespace adml::sim
