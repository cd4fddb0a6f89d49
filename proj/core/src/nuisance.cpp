#include "adml/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "adml/errors.hpp"

namespace adml::nuisance {

namespace {

struct Selection {
  lasso::LassoFit fit;  // penalized fit on the full sample at the CV choice
  std::size_t profile = 0;
};

// CV over lambda for each penalty profile, then the full-sample path down to
// the chosen lambda (warm-started, as the CV folds were).
Selection select_model(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const lasso::CvPlan& plan,
                       const std::vector<Eigen::VectorXd>& profiles, const NuisanceConfig& config,
                       bool fit_intercept) {
  auto options = config.solver;
  options.fit_intercept = fit_intercept;

  bool penalized = false;
  for (const auto& pw : profiles) penalized = penalized || (pw.array() > 0.0).any();
  if (X.cols() == 0 || !penalized) {
    Selection s;
    s.fit.coefficients = Eigen::VectorXd::Zero(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) s.fit.support.push_back(j);
    return s;
  }
  if (plan.folds < 2) {
    // Too few rows to cross-validate: keep only the unpenalized columns.
    Selection s;
    s.fit.coefficients = Eigen::VectorXd::Zero(X.cols());
    s.fit.lambda = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (profiles.front()[j] == 0.0) s.fit.support.push_back(j);
    }
    return s;
  }

  const lasso::CrossValidator cv(X, y, plan, options);
  double best_error = std::numeric_limits<double>::infinity();
  Selection s;
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    std::vector<double> grid = config.lambda_override;
    if (grid.empty()) {
      grid = lasso::log_grid(cv.full_problem().lambda_max(profiles[k]), config.lambda_count,
                             config.lambda_ratio);
    }
    auto res = cv.run(profiles[k], grid);
    if (res.cv_error[res.best_index] < best_error) {
      best_error = res.cv_error[res.best_index];
      s.fit = std::move(res.best_fit);
      s.profile = k;
    }
  }
  return s;
}

basis::BasisSpec without_intercept(basis::BasisSpec spec) {
  spec.include_intercept = false;
  spec.block = basis::Block::covariate_only;
  return spec;
}

Eigen::VectorXd clip(const Eigen::VectorXd& v, double lo, double hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

double truncation_loss(const Eigen::Ref<const Eigen::VectorXd>& raw,
                       const Eigen::Ref<const Eigen::VectorXd>& A, double cutoff) {
  const auto n = raw.size();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = std::clamp(raw[i], cutoff, 1.0 - cutoff);
    const double treated = 1.0 / p;
    const double control = -1.0 / (1.0 - p);
    const double at_obs = A[i] * treated + (1.0 - A[i]) * control;
    total += at_obs * at_obs - 2.0 * (treated - control);
  }
  return total / static_cast<double>(n);
}

double select_truncation(const Eigen::Ref<const Eigen::VectorXd>& raw,
                         const Eigen::Ref<const Eigen::VectorXd>& A, const std::vector<double>& grid) {
  if (grid.empty()) throw InvalidInput("truncation grid is empty");
  if (raw.size() != A.size() || raw.size() == 0) throw InvalidInput("truncation: length mismatch");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(grid[k] > 0.0 && grid[k] < 0.5)) throw InvalidInput("truncation cutoffs must lie in (0, 0.5)");
    if (k > 0 && !(grid[k] > grid[k - 1])) throw InvalidInput("truncation grid must be ascending");
  }
  double best = grid.front();
  double best_loss = truncation_loss(raw, A, best);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double loss = truncation_loss(raw, A, grid[k]);
    if (loss < best_loss) {
      best_loss = loss;
      best = grid[k];
    }
  }
  return best;
}

Eigen::VectorXd PropensityFit::predict(const Eigen::Ref<const Eigen::MatrixXd>& W) const {
  if (known) return Eigen::VectorXd::Constant(W.rows(), *known);
  Eigen::VectorXd raw_pred;
  if (degenerate) {
    raw_pred = Eigen::VectorXd::Constant(W.rows(), regression.intercept);
  } else {
    raw_pred = regression.predict(basis::expand(basis, W).values);
  }
  return clip(clip(raw_pred, 0.0, 1.0), cutoff, 1.0 - cutoff);
}

PropensityFit fit_propensity(const Dataset& data, const basis::BasisSpec& spec,
                             const std::vector<double>& cutoff_grid, const lasso::CvPlan& plan,
                             const NuisanceConfig& config) {
  PropensityFit out;
  out.basis = without_intercept(spec);
  const auto n = data.size();
  const bool constant = (data.A.array() == data.A[0]).all();
  if (constant) {
    out.degenerate = true;
    out.regression.coefficients = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out.basis.column_count()));
    out.regression.intercept = data.A[0];
    out.raw = Eigen::VectorXd::Constant(n, data.A[0]);
  } else {
    const auto X = basis::expand(out.basis, data.W).values;
    const std::vector<Eigen::VectorXd> profiles{Eigen::VectorXd::Ones(X.cols())};
    const auto sel = select_model(X, data.A, plan, profiles, config, true);
    out.regression = lasso::relaxed_refit(X, data.A, sel.fit.support);
    out.regression.lambda = sel.fit.lambda;
    out.raw = clip(out.regression.predict(X), 0.0, 1.0);
  }
  out.cutoff = select_truncation(out.raw, data.A, cutoff_grid);
  out.values = clip(out.raw, out.cutoff, 1.0 - out.cutoff);
  return out;
}

PropensityFit known_propensity(const Dataset& data, double value) {
  if (!(value > 0.0 && value < 1.0)) throw InvalidInput("known propensity must lie in (0, 1)");
  PropensityFit out;
  out.known = value;
  out.raw = Eigen::VectorXd::Constant(data.size(), value);
  out.values = out.raw;
  return out;
}

Eigen::VectorXd OutcomeFit::mu(const Eigen::Ref<const Eigen::MatrixXd>& W, double a) const {
  const auto phi = basis::expand(basis, W).values;
  Eigen::VectorXd out = (phi * control_coefficients).array() + intercept;
  if (a != 0.0) out += a * ((phi * cate_coefficients).array() + treatment_coefficient).matrix();
  return out;
}

Eigen::VectorXd OutcomeFit::mu(const Eigen::Ref<const Eigen::MatrixXd>& W,
                               const Eigen::VectorXd& A) const {
  const auto phi = basis::expand(basis, W).values;
  const Eigen::VectorXd base = (phi * control_coefficients).array() + intercept;
  const Eigen::VectorXd effect = (phi * cate_coefficients).array() + treatment_coefficient;
  return base + A.cwiseProduct(effect);
}

Eigen::VectorXd OutcomeFit::cate(const Eigen::Ref<const Eigen::MatrixXd>& W) const {
  const auto phi = basis::expand(basis, W).values;
  return (phi * cate_coefficients).array() + treatment_coefficient;
}

Eigen::MatrixXd OutcomeFit::working_design(const Eigen::Ref<const Eigen::MatrixXd>& W,
                                           const Eigen::VectorXd& A) const {
  if (A.size() != W.rows()) throw InvalidInput("working design: treatment length mismatch");
  const auto phi = basis::expand(basis, W).values;
  const auto ns = static_cast<Eigen::Index>(control_support.size());
  const auto nt = static_cast<Eigen::Index>(cate_support.size());
  Eigen::MatrixXd out(W.rows(), 2 + ns + nt);
  out.col(0).setOnes();
  out.middleCols(1, ns) = phi(Eigen::all, control_support);
  out.col(1 + ns) = A;
  out.rightCols(nt) = phi(Eigen::all, cate_support).array().colwise() * A.array();
  return out;
}

Eigen::MatrixXd OutcomeFit::working_design_at(const Eigen::Ref<const Eigen::MatrixXd>& W, double a) const {
  return working_design(W, Eigen::VectorXd::Constant(W.rows(), a));
}

OutcomeFit fit_outcome_joint(const Dataset& data, const basis::BasisSpec& spec,
                             const lasso::CvPlan& plan, const NuisanceConfig& config) {
  OutcomeFit out;
  out.basis = without_intercept(spec);
  auto two_block = out.basis;
  two_block.include_intercept = true;
  two_block.block = basis::Block::treatment_interacted;
  const auto full = basis::expand(two_block, data.W, &data.A).values;
  // Drop the constant column; the Lasso fits its own intercept.
  const Eigen::MatrixXd X = full.rightCols(full.cols() - 1);
  const auto p0 = static_cast<Eigen::Index>(out.basis.column_count());
  const Eigen::Index a_col = p0;

  std::vector<Eigen::VectorXd> profiles;
  if (p0 == 0) {
    profiles.push_back(Eigen::VectorXd::Zero(X.cols()));
  }
  for (double ratio : p0 == 0 ? std::vector<double>{} : config.cate_penalty_ratios) {
    if (!(ratio > 0.0)) throw InvalidInput("CATE penalty ratios must be positive");
    Eigen::VectorXd pw(X.cols());
    pw.head(p0).setOnes();
    pw[a_col] = 0.0;
    pw.tail(p0).setConstant(ratio);
    profiles.push_back(std::move(pw));
  }
  if (profiles.empty()) throw InvalidInput("no CATE penalty ratios configured");

  const auto sel = select_model(X, data.Y, plan, profiles, config, true);
  auto support = sel.fit.support;
  if (std::find(support.begin(), support.end(), a_col) == support.end()) support.push_back(a_col);
  const auto refit = lasso::relaxed_refit(X, data.Y, support);

  out.intercept = refit.intercept;
  out.control_coefficients = refit.coefficients.head(p0);
  out.treatment_coefficient = refit.coefficients[a_col];
  out.cate_coefficients = refit.coefficients.tail(p0);
  for (auto j : refit.support) {
    if (j < p0) {
      out.control_support.push_back(j);
    } else if (j > a_col) {
      out.cate_support.push_back(j - a_col - 1);
    }
  }
  out.lambda = sel.fit.lambda;
  out.cate_penalty_ratio = p0 == 0 ? 1.0 : config.cate_penalty_ratios[sel.profile];
  return out;
}

Eigen::VectorXd CateFit::predict(const Eigen::Ref<const Eigen::MatrixXd>& W) const {
  const auto phi = basis::expand(basis, W).values;
  return (phi * coefficients).array() + intercept_coefficient;
}

Eigen::MatrixXd CateFit::working_design(const Eigen::Ref<const Eigen::MatrixXd>& W) const {
  const auto phi = basis::expand(basis, W).values;
  Eigen::MatrixXd out(W.rows(), 1 + static_cast<Eigen::Index>(support.size()));
  out.col(0).setOnes();
  out.rightCols(static_cast<Eigen::Index>(support.size())) = phi(Eigen::all, support);
  return out;
}

CateFit rlearner_fit(const Dataset& data, const Eigen::VectorXd& pi, const Eigen::VectorXd& m,
                     const basis::BasisSpec& spec, const lasso::CvPlan& plan,
                     const NuisanceConfig& config) {
  const auto n = data.size();
  if (pi.size() != n || m.size() != n) throw InvalidInput("R-learner: nuisance length mismatch");
  const Eigen::VectorXd resid_a = data.A - pi;
  const double energy = resid_a.squaredNorm();
  if (!(energy > 1e-14 * static_cast<double>(n))) {
    throw DegenerateDesign("R-learner: residualized treatment A - pi is identically zero");
  }
  CateFit out;
  out.basis = without_intercept(spec);
  const auto phi = basis::expand(out.basis, data.W).values;
  const auto p = phi.cols();
  Eigen::MatrixXd X(n, p + 1);
  X.col(0) = resid_a;
  X.rightCols(p) = phi.array().colwise() * resid_a.array();
  const Eigen::VectorXd pseudo = data.Y - m;

  Eigen::VectorXd pw = Eigen::VectorXd::Ones(p + 1);
  pw[0] = 0.0;
  const auto sel = select_model(X, pseudo, plan, {pw}, config, false);
  auto support = sel.fit.support;
  if (std::find(support.begin(), support.end(), Eigen::Index{0}) == support.end()) support.push_back(0);
  const auto refit = lasso::relaxed_refit(X, pseudo, support, nullptr, false);

  out.intercept_coefficient = refit.coefficients[0];
  out.coefficients = refit.coefficients.tail(p);
  for (auto j : refit.support) {
    if (j > 0) out.support.push_back(j - 1);
  }
  out.lambda = sel.fit.lambda;
  return out;
}

Eigen::VectorXd compute_m(const Eigen::VectorXd& pi, const Eigen::VectorXd& mu1,
                          const Eigen::VectorXd& mu0) {
  if (pi.size() != mu1.size() || pi.size() != mu0.size()) throw InvalidInput("compute_m: length mismatch");
  return pi.cwiseProduct(mu1) + (1.0 - pi.array()).matrix().cwiseProduct(mu0);
}

lasso::CvPlan make_plan(const Dataset& data, const NuisanceConfig& config) {
  if (data.size() < config.cv_folds) {
    lasso::CvPlan empty;
    empty.fold_of.assign(static_cast<std::size_t>(data.size()), 0);
    return empty;
  }
  Eigen::MatrixXd content(data.size(), data.dimension() + 2);
  content << data.W, data.A, data.Y;
  return lasso::make_cv_plan(content, config.cv_folds, config.seed);
}

NuisanceBundle fit_nuisances(const Dataset& data, const NuisanceConfig& config, const FitRequest& request) {
  data.validate();
  if (data.size() == 0) throw InvalidInput("empty dataset");
  const bool constant_a = (data.A.array() == data.A[0]).all();
  if (constant_a && (request.need_propensity || request.need_cate) && !request.known_propensity) {
    throw DegenerateDesign("treatment is constant; the ATE is not identified from this sample");
  }

  NuisanceBundle out;
  out.config = config;
  const auto plan = make_plan(data, config);
  const auto phi = basis::build_additive_basis(data.W, config.knots_per_covariate,
                                               basis::Block::covariate_only);

  if (request.known_propensity) {
    out.propensity = known_propensity(data, *request.known_propensity);
  } else if (request.need_propensity || request.need_cate) {
    const auto prop_basis = basis::build_additive_basis(data.W, config.propensity_knots,
                                                        basis::Block::covariate_only);
    out.propensity = fit_propensity(data, prop_basis, config.cutoff_grid, plan, config);
  } else {
    out.propensity.values = Eigen::VectorXd::Constant(data.size(), data.A.mean());
    out.propensity.raw = out.propensity.values;
  }

  out.outcome = fit_outcome_joint(data, phi, plan, config);
  out.mu1 = out.outcome.mu(data.W, 1.0);
  out.mu0 = out.outcome.mu(data.W, 0.0);
  out.m = compute_m(out.pi(), out.mu1, out.mu0);
  if (request.need_cate) {
    out.cate = rlearner_fit(data, out.pi(), out.m, phi, plan, config);
  }
  return out;
}

}  // namespace adml::nuisance
