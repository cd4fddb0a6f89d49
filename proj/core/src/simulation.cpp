#include "adml/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

#include "adml/errors.hpp"
#include "adml/seeding.hpp"

namespace adml::sim {

std::size_t dictionary_size(std::size_t n) {
  static constexpr std::pair<std::size_t, std::size_t> schedule[] = {
      {500, 80}, {1000, 400}, {2000, 608}, {3000, 608}, {4000, 800}, {5000, 800}};
  std::size_t best = 0;
  std::size_t best_gap = static_cast<std::size_t>(-1);
  for (std::size_t k = 0; k < std::size(schedule); ++k) {
    const auto at = schedule[k].first;
    const auto gap = at > n ? at - n : n - at;
    if (gap < best_gap) {
      best_gap = gap;
      best = k;
    }
  }
  return schedule[best].second;
}

std::size_t knots_per_covariate(std::size_t k, std::size_t dimension) {
  if (dimension == 0) throw InvalidInput("dimension must be positive");
  const double per = std::round(static_cast<double>(k) / (2.0 * static_cast<double>(dimension)));
  return std::max<std::size_t>(1, static_cast<std::size_t>(per));
}

nuisance::NuisanceConfig nuisance_config_for(const SimulationConfig& config, std::size_t n,
                                             std::size_t dimension) {
  auto out = config.nuisance;
  const auto it = config.dictionary_overrides.find(n);
  const auto k = it != config.dictionary_overrides.end() ? it->second : dictionary_size(n);
  out.knots_per_covariate =
      config.knots_per_covariate > 0 ? config.knots_per_covariate : knots_per_covariate(k, dimension);
  out.propensity_knots = config.propensity_knots > 0 ? config.propensity_knots : out.knots_per_covariate;
  return out;
}

MetricsRow aggregate(const std::vector<std::optional<EstimateSummary>>& estimates, double truth) {
  MetricsRow row;
  double sum = 0.0;
  for (const auto& e : estimates) {
    if (!e) {
      ++row.failures;
      continue;
    }
    ++row.replications;
    sum += e->psi;
  }
  if (row.replications == 0) {
    row.bias = row.se = row.rmse = row.coverage = row.mean_ci_width = std::nan("");
    return row;
  }
  const double R = static_cast<double>(row.replications);
  const double mean = sum / R;
  double ss = 0.0;
  double covered = 0.0;
  double width = 0.0;
  for (const auto& e : estimates) {
    if (!e) continue;
    ss += (e->psi - mean) * (e->psi - mean);
    covered += (e->ci_lower <= truth && truth <= e->ci_upper) ? 1.0 : 0.0;
    width += e->ci_upper - e->ci_lower;
  }
  row.bias = mean - truth;
  row.se = std::sqrt(ss / R);
  row.rmse = std::sqrt(row.bias * row.bias + row.se * row.se);
  row.coverage = covered / R;
  row.mean_ci_width = width / R;
  return row;
}

ReplicationRecord run_replication(const DgpSpec& spec, std::size_t n,
                                  const std::vector<estimators::Estimator>& which, std::uint64_t seed,
                                  const SimulationConfig& config) {
  using estimators::Estimator;
  ReplicationRecord record;
  record.seed = seed;
  record.estimates.assign(which.size(), std::nullopt);
  record.errors.assign(which.size(), std::string{});

  const auto data = sample_dgp(spec, n, seed);
  record.treated_fraction = data.A.mean();

  const auto need = [&](Estimator e) { return std::find(which.begin(), which.end(), e) != which.end(); };
  nuisance::FitRequest request;
  request.need_cate = need(Estimator::partially_linear_admle);
  request.need_propensity = need(Estimator::partially_linear_admle) || need(Estimator::aipw) ||
                            need(Estimator::semiparametric_intercept);

  auto ncfg = nuisance_config_for(config, n, spec.dimension);
  ncfg.seed = mix64(seed ^ config.nuisance.seed);

  std::optional<nuisance::NuisanceBundle> bundle;
  std::string nuisance_error;
  try {
    bundle = nuisance::fit_nuisances(data, ncfg, request);
  } catch (const Error& e) {
    nuisance_error = e.what();
  }
  for (std::size_t k = 0; k < which.size(); ++k) {
    if (!bundle) {
      record.errors[k] = nuisance_error;
      continue;
    }
    try {
      const auto est = estimators::estimate(which[k], data, *bundle, config.alpha);
      record.estimates[k] = EstimateSummary{est.psi, est.sigma, est.ci_lower, est.ci_upper};
    } catch (const Error& e) {
      record.errors[k] = e.what();
    }
  }
  return record;
}

ReplicationResult run_replications(const DgpSpec& base, std::size_t n,
                                   const std::vector<estimators::Estimator>& which, std::size_t R,
                                   std::uint64_t master_seed, const SimulationConfig& config) {
  if (R == 0) throw InvalidInput("run_replications needs R >= 1");
  if (n == 0) throw InvalidInput("run_replications needs n >= 1");
  if (which.empty()) throw InvalidInput("no estimators requested");
  const DgpSpec spec = base.perturbed ? apply_local_perturbation(base, n) : base;
  spec.validate();

  ReplicationResult result;
  result.truth = exact_ate(spec);

  result.records.resize(R);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&]() {
    while (!failed.load()) {
      const auto r = next.fetch_add(1);
      if (r >= R) return;
      try {
        result.records[r] = run_replication(spec, n, which, split_seed(master_seed, r), config);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(R)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t k = 0; k < which.size(); ++k) {
    std::vector<std::optional<EstimateSummary>> column;
    column.reserve(R);
    for (const auto& rec : result.records) column.push_back(rec.estimates[k]);
    auto row = aggregate(column, result.truth);
    row.estimator = which[k];
    row.n = n;
    row.gamma = spec.gamma;
    row.outcome_form = spec.outcome_form;
    row.perturbed = spec.perturbed;
    result.table.rows.push_back(row);
  }
  return result;
}

}  // namespace adml::sim
