#include "adml/cli/commands.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "adml/cli/csv.hpp"
#include "adml/errors.hpp"
#include "adml/hal_basis.hpp"
#include "adml/nuisance.hpp"
#include "adml/projections.hpp"

namespace adml::cli {

namespace {

using estimators::Estimator;

const std::vector<Estimator> kAllEstimators{Estimator::plug_in_admle, Estimator::partially_linear_admle,
                                            Estimator::semiparametric_intercept, Estimator::aipw};

std::vector<Estimator> parse_estimators(const std::vector<std::string>& names) {
  std::vector<Estimator> out;
  for (const auto& name : names) {
    const auto e = estimators::parse_estimator(name);
    if (!e) throw UsageError("unknown estimator '" + name + "'");
    out.push_back(*e);
  }
  return out;
}

sim::OutcomeForm parse_form(const std::string& name) {
  const auto form = sim::parse_outcome_form(name);
  if (!form) throw UsageError("unknown outcome form '" + name + "' (expected linear or nonlinear)");
  return *form;
}

std::string csv_safe(std::string text) {
  for (auto& c : text) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return text;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot write '" + path + "'");
  file << text;
  if (!file) throw Error("failed writing '" + path + "'");
}

struct SimulateArgs {
  std::string config_path;
  std::vector<double> gammas;
  std::vector<std::string> forms;
  std::optional<bool> perturbed;
  std::vector<std::size_t> sizes;
  std::optional<std::size_t> reps;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::size_t> knots;
  std::vector<std::string> estimators;
  std::optional<std::string> out;
  std::optional<std::string> records_out;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  auto config = a.config_path.empty() ? ExperimentConfig{} : load_config(a.config_path);
  if (!a.gammas.empty()) config.gammas = a.gammas;
  if (!a.forms.empty()) {
    config.outcome_forms.clear();
    for (const auto& f : a.forms) config.outcome_forms.push_back(parse_form(f));
  }
  if (a.perturbed) config.perturbed = *a.perturbed;
  if (!a.sizes.empty()) config.sample_sizes = a.sizes;
  if (a.reps) config.replications = *a.reps;
  if (a.seed) config.seed = *a.seed;
  if (a.alpha) config.alpha = *a.alpha;
  if (a.knots) config.knots_per_covariate = *a.knots;
  if (!a.estimators.empty()) config.estimators = parse_estimators(a.estimators);
  if (a.out) config.results_path = *a.out;
  if (a.records_out) config.replications_path = *a.records_out;
  config.validate();

  const auto threads = thread_budget();
  const auto start = std::chrono::steady_clock::now();
  const auto cells = run_experiment(config, threads);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::ostringstream results;
  write_results(results, cells);
  emit(config.results_path, results.str(), out);
  if (!config.replications_path.empty()) {
    std::ostringstream records;
    write_replications(records, config, cells);
    emit(config.replications_path, records.str(), out);
  }
  std::size_t failures = 0;
  for (const auto& cell : cells) {
    for (const auto& row : cell.result.table.rows) failures += row.failures;
  }
  err << "simulate: " << cells.size() << " cells, " << config.replications << " replications each, "
      << threads << " threads, " << format_number(std::round(seconds * 100.0) / 100.0) << " s";
  if (failures > 0) err << ", " << failures << " failed estimates";
  err << '\n';
  return kSuccess;
}

struct EstimateArgs {
  std::string data_path;
  std::vector<std::string> estimators;
  double alpha = 0.05;
  std::uint64_t seed = 20240601;
  std::size_t knots = 0;
  std::optional<double> propensity;
  std::string out;
};

int cmd_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
  if (a.propensity && !(*a.propensity > 0.0 && *a.propensity < 1.0)) {
    throw UsageError("--propensity must lie in (0, 1)");
  }
  const auto which = a.estimators.empty() ? kAllEstimators : parse_estimators(a.estimators);
  const auto data = read_dataset_file(a.data_path);
  data.validate();
  const auto n = static_cast<std::size_t>(data.size());

  sim::SimulationConfig sim_config;
  sim_config.knots_per_covariate = a.knots;
  auto ncfg = sim::nuisance_config_for(sim_config, n, static_cast<std::size_t>(data.dimension()));
  ncfg.seed = a.seed;

  const auto need = [&](Estimator e) { return std::find(which.begin(), which.end(), e) != which.end(); };
  nuisance::FitRequest request;
  request.need_cate = need(Estimator::partially_linear_admle);
  request.need_propensity = need(Estimator::partially_linear_admle) || need(Estimator::aipw) ||
                            need(Estimator::semiparametric_intercept);
  request.known_propensity = a.propensity;
  const auto bundle = nuisance::fit_nuisances(data, ncfg, request);

  std::ostringstream text;
  text << "estimator,n,psi,sigma,ci_lower,ci_upper,alpha,model_size,truncation_cutoff\n";
  int status = kSuccess;
  for (const auto e : which) {
    try {
      const auto est = estimators::estimate(e, data, bundle, a.alpha);
      text << estimators::to_string(e) << ',' << n << ',' << format_number(est.psi) << ','
           << format_number(est.sigma) << ',' << format_number(est.ci_lower) << ','
           << format_number(est.ci_upper) << ',' << format_number(a.alpha) << ',' << est.model_size << ',';
      if (request.need_propensity) text << format_number(bundle.propensity.cutoff);
      text << '\n';
    } catch (const Error& ex) {
      err << "estimate: " << estimators::to_string(e) << " failed: " << ex.what() << '\n';
      status = kRuntimeFailure;
    }
  }
  emit(a.out, text.str(), out);
  return status;
}

struct OracleArgs {
  double gamma = 0.5;
  std::string form = "linear";
  bool perturbed = false;
  std::size_t n = 0;
  std::size_t mc_size = 1'000'000;
  std::uint64_t seed = 0x5EED;
  std::string basis = "hinge";
  std::size_t knots = 3;
  std::size_t oracle_knots = 10;
  std::string out;
};

int cmd_oracle(const OracleArgs& a, std::ostream& out) {
  if (a.mc_size < 2) throw UsageError("--mc-size must be at least 2");
  if (a.perturbed && a.n == 0) throw UsageError("--perturbed needs --n");
  if (a.knots == 0 || a.oracle_knots == 0) throw UsageError("knot counts must be at least 1");
  sim::DgpSpec spec;
  spec.gamma = a.gamma;
  spec.outcome_form = parse_form(a.form);
  if (a.perturbed) {
    spec.perturbed = true;
    spec = sim::apply_local_perturbation(spec, a.n);
  }
  spec.validate();

  const projections::PopulationOracle oracle(spec, a.mc_size, a.seed);
  const auto build = [&](std::size_t K, basis::Block block) {
    return basis::build_additive_basis(oracle.W(), K, block, true, true);
  };
  const std::size_t working_knots = a.basis == "oracle" ? a.oracle_knots : a.knots;
  const auto working_w = build(working_knots, basis::Block::covariate_only);
  const auto oracle_w = build(a.oracle_knots, basis::Block::covariate_only);
  const auto working_aw = build(working_knots, basis::Block::treatment_interacted);
  const auto oracle_aw = build(a.oracle_knots, basis::Block::treatment_interacted);

  const auto ate = projections::true_ate(oracle);
  const auto pl_working = projections::working_estimand(oracle, working_w);
  const auto pl_oracle = projections::working_estimand(oracle, oracle_w);
  const auto pl_bias = projections::oracle_bias_partially_linear(oracle, working_w, oracle_w);
  const auto pi_working = projections::working_estimand_plug_in(oracle, working_aw);
  const auto pi_oracle = projections::working_estimand_plug_in(oracle, oracle_aw);
  const auto pi_bias = projections::oracle_bias_plug_in(oracle, working_aw, oracle_aw);

  std::ostringstream text;
  text << "quantity,value,mc_se,covering\n";
  // covering: whether value -/+ 1.96 mc_se contains the reference (the true
  // ATE for estimands, zero for biases).
  const auto row = [&](const char* name, const projections::McValue& v, double reference) {
    const bool covers = std::abs(v.value - reference) <= 1.959963984540054 * v.se;
    text << name << ',' << format_number(v.value) << ',' << format_number(v.se) << ','
         << (covers ? "true" : "false") << '\n';
  };
  const auto plain = [&](const char* name, double value) {
    text << name << ',' << format_number(value) << ",,\n";
  };
  text << "true_ate," << format_number(ate.value) << ',' << format_number(ate.se) << ",\n";
  plain("overlap_constant", sim::overlap_constant(spec));
  row("pl_working_estimand", pl_working, ate.value);
  row("pl_oracle_estimand", pl_oracle, ate.value);
  row("pl_oracle_bias", pl_bias, 0.0);
  row("plug_in_working_estimand", pi_working, ate.value);
  row("plug_in_oracle_estimand", pi_oracle, ate.value);
  row("plug_in_oracle_bias", pi_bias.bias, 0.0);
  plain("riesz_residual_norm", pi_bias.riesz_residual_norm);
  plain("outcome_residual_norm", pi_bias.outcome_residual_norm);
  emit(a.out, text.str(), out);
  return kSuccess;
}

struct SampleArgs {
  double gamma = 0.5;
  std::string form = "linear";
  bool perturbed = false;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_dgp_sample(const SampleArgs& a, std::ostream& out) {
  if (a.n == 0) throw UsageError("--n must be at least 1");
  sim::DgpSpec spec;
  spec.gamma = a.gamma;
  spec.outcome_form = parse_form(a.form);
  if (a.perturbed) {
    spec.perturbed = true;
    spec = sim::apply_local_perturbation(spec, a.n);
  }
  spec.validate();
  std::ostringstream text;
  write_dataset(text, sim::sample_dgp(spec, a.n, a.seed));
  emit(a.out, text.str(), out);
  return kSuccess;
}

}  // namespace

unsigned thread_budget() {
  if (const char* env = std::getenv("ADML_THREADS"); env != nullptr && *env != '\0') {
    unsigned value = 0;
    const auto end = env + std::char_traits<char>::length(env);
    const auto res = std::from_chars(env, end, value);
    if (res.ec != std::errc{} || res.ptr != end || value == 0) {
      throw UsageError(std::string("ADML_THREADS must be a positive integer, got '") + env + "'");
    }
    return value;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<CellResult> run_experiment(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  const auto sim_config = config.simulation_config(threads);
  std::vector<CellResult> cells;
  for (const double gamma : config.gammas) {
    for (const auto form : config.outcome_forms) {
      for (const auto n : config.sample_sizes) {
        CellResult cell;
        cell.spec.gamma = gamma;
        cell.spec.outcome_form = form;
        cell.spec.perturbed = config.perturbed;
        cell.spec.noise_variance = config.noise_variance;
        cell.n = n;
        cell.result = sim::run_replications(cell.spec, n, config.estimators, config.replications, config.seed,
                                            sim_config);
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

void write_results(std::ostream& out, const std::vector<CellResult>& cells) {
  out << kMetricsHeader << '\n';
  for (const auto& cell : cells) {
    for (const auto& row : cell.result.table.rows) write_metrics_row(out, row);
  }
}

void write_replications(std::ostream& out, const ExperimentConfig& config, const std::vector<CellResult>& cells) {
  out << "gamma,outcome_form,perturbed,n,replication,seed,treated_fraction,truth,estimator,psi,sigma,ci_lower,"
         "ci_upper,error\n";
  for (const auto& cell : cells) {
    for (std::size_t r = 0; r < cell.result.records.size(); ++r) {
      const auto& rec = cell.result.records[r];
      for (std::size_t k = 0; k < config.estimators.size(); ++k) {
        out << format_number(cell.spec.gamma) << ',' << sim::to_string(cell.spec.outcome_form) << ','
            << (cell.spec.perturbed ? "true" : "false") << ',' << cell.n << ',' << r << ',' << rec.seed << ','
            << format_number(rec.treated_fraction) << ',' << format_number(cell.result.truth) << ','
            << estimators::to_string(config.estimators[k]) << ',';
        if (const auto& e = rec.estimates[k]) {
          out << format_number(e->psi) << ',' << format_number(e->sigma) << ',' << format_number(e->ci_lower)
              << ',' << format_number(e->ci_upper) << ",\n";
        } else {
          out << ",,,," << csv_safe(rec.errors[k]) << '\n';
        }
      }
    }
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive debiased machine learning estimators of the average treatment effect", "adml"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo study and write per-cell metrics");
  simulate->add_option("--config", sim_args.config_path, "YAML experiment config")->check(CLI::ExistingFile);
  simulate->add_option("--gamma", sim_args.gammas, "Propensity strength (one or more)");
  simulate->add_option("--outcome-form", sim_args.forms, "linear or nonlinear (one or more)");
  simulate->add_flag("--perturbed,!--no-perturbed", sim_args.perturbed, "Use the local perturbation");
  simulate->add_option("--n", sim_args.sizes, "Sample sizes");
  simulate->add_option("--reps", sim_args.reps, "Replications per cell");
  simulate->add_option("--seed", sim_args.seed, "Master seed");
  simulate->add_option("--alpha", sim_args.alpha, "Interval level 1 - alpha");
  simulate->add_option("--knots-per-cov", sim_args.knots, "Knots per covariate for every n (0 = schedule)");
  simulate->add_option("--estimator", sim_args.estimators, "Estimators to run");
  simulate->add_option("--out", sim_args.out, "Metrics CSV path (default stdout)");
  simulate->add_option("--records-out", sim_args.records_out, "Per-replication CSV path");

  EstimateArgs est_args;
  auto* estimate = app.add_subcommand("estimate", "Estimate the ATE on a CSV dataset");
  estimate->add_option("--data", est_args.data_path, "CSV with header W1..Wd,A,Y")->required();
  estimate->add_option("--estimator", est_args.estimators, "Estimators to run (default all)");
  estimate->add_option("--alpha", est_args.alpha, "Interval level 1 - alpha");
  estimate->add_option("--seed", est_args.seed, "Cross-validation seed");
  estimate->add_option("--knots-per-cov", est_args.knots, "Knots per covariate (0 = schedule)");
  estimate->add_option("--propensity", est_args.propensity, "Known constant propensity");
  estimate->add_option("--out", est_args.out, "Output CSV path (default stdout)");

  OracleArgs oracle_args;
  auto* oracle = app.add_subcommand("oracle", "Monte Carlo population quantities of the simulation design");
  oracle->add_option("--gamma", oracle_args.gamma, "Propensity strength");
  oracle->add_option("--outcome-form", oracle_args.form, "linear or nonlinear");
  oracle->add_flag("--perturbed", oracle_args.perturbed, "Use the local perturbation at --n");
  oracle->add_option("--n", oracle_args.n, "Sample size for the perturbation");
  oracle->add_option("--mc-size", oracle_args.mc_size, "Monte Carlo draws");
  oracle->add_option("--seed", oracle_args.seed, "Monte Carlo seed");
  oracle->add_option("--basis", oracle_args.basis, "Working basis: hinge, or oracle to reuse the oracle basis")
      ->check(CLI::IsMember({"hinge", "oracle"}));
  oracle->add_option("--knots-per-cov", oracle_args.knots, "Knots per covariate of the working basis");
  oracle->add_option("--oracle-knots", oracle_args.oracle_knots, "Knots per covariate of the oracle basis");
  oracle->add_option("--out", oracle_args.out, "Output CSV path (default stdout)");

  SampleArgs sample_args;
  auto* sample = app.add_subcommand("dgp-sample", "Draw one dataset from the simulation design");
  sample->add_option("--gamma", sample_args.gamma, "Propensity strength");
  sample->add_option("--outcome-form", sample_args.form, "linear or nonlinear");
  sample->add_flag("--perturbed", sample_args.perturbed, "Use the local perturbation at --n");
  sample->add_option("--n", sample_args.n, "Rows");
  sample->add_option("--seed", sample_args.seed, "Seed");
  sample->add_option("--out", sample_args.out, "Output CSV path (default stdout)");

  std::string config_path;
  auto* config = app.add_subcommand("config", "Validate a config and print its canonical form");
  config->add_option("config", config_path, "YAML experiment config")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*simulate) return cmd_simulate(sim_args, out, err);
    if (*estimate) return cmd_estimate(est_args, out, err);
    if (*oracle) return cmd_oracle(oracle_args, out);
    if (*sample) return cmd_dgp_sample(sample_args, out);
    out << serialize_config(load_config(config_path));
    return kSuccess;
  } catch (const UsageError& e) {
    err << "adml: " << e.what() << '\n';
    return kUsageError;
  } catch (const InvalidInput& e) {
    err << "adml: invalid input: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "adml: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

}  // namespace adml::cli
