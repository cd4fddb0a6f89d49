#include "adml/estimators.hpp"

#include <cmath>

#include "adml/errors.hpp"
#include "adml/lasso.hpp"
#include "adml/normal.hpp"

namespace adml::estimators {

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::plug_in_admle: return "plug_in_admle";
    case Estimator::partially_linear_admle: return "partially_linear_admle";
    case Estimator::semiparametric_intercept: return "semiparametric_intercept";
    case Estimator::aipw: return "aipw";
  }
  return "unknown";
}

std::optional<Estimator> parse_estimator(std::string_view name) {
  for (auto e : {Estimator::plug_in_admle, Estimator::partially_linear_admle,
                 Estimator::semiparametric_intercept, Estimator::aipw}) {
    if (to_string(e) == name) return e;
  }
  return std::nullopt;
}

Interval confidence_interval(double psi, const Eigen::Ref<const Eigen::VectorXd>& if_values, double alpha) {
  if (if_values.size() == 0) throw InvalidInput("confidence interval: no influence-function values");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("confidence interval: alpha must lie in (0, 1)");
  const double n = static_cast<double>(if_values.size());
  Interval out;
  out.sigma = std::sqrt(if_values.squaredNorm() / n);
  const double half = normal_quantile(1.0 - alpha / 2.0) * out.sigma / std::sqrt(n);
  out.lower = psi - half;
  out.upper = psi + half;
  return out;
}

namespace {

AteEstimate finish(Estimator which, double psi, Eigen::VectorXd if_values, double alpha) {
  AteEstimate est;
  est.estimator = which;
  est.psi = psi;
  est.n = if_values.size();
  const auto ci = confidence_interval(psi, if_values, alpha);
  est.sigma = ci.sigma;
  est.ci_lower = ci.lower;
  est.ci_upper = ci.upper;
  est.alpha = alpha;
  est.if_values = std::move(if_values);
  return est;
}

void same_length(std::initializer_list<Eigen::Index> sizes) {
  const auto first = *sizes.begin();
  for (auto s : sizes) {
    if (s != first) throw InvalidInput("estimator inputs have different lengths");
  }
  if (first == 0) throw InvalidInput("estimator inputs are empty");
}

}  // namespace

RieszFit empirical_riesz(const Eigen::Ref<const Eigen::MatrixXd>& obs,
                         const Eigen::Ref<const Eigen::MatrixXd>& treated,
                         const Eigen::Ref<const Eigen::MatrixXd>& control) {
  if (obs.rows() != treated.rows() || obs.rows() != control.rows() || obs.cols() != treated.cols() ||
      obs.cols() != control.cols()) {
    throw InvalidInput("empirical_riesz: design shapes differ");
  }
  const double n = static_cast<double>(obs.rows());
  const Eigen::MatrixXd gram = obs.transpose() * obs / n;
  const Eigen::VectorXd target = (treated - control).colwise().sum().transpose() / n;
  RieszFit fit;
  fit.coefficients = lasso::solve_gram(gram, target, &fit.rank_deficient);
  fit.values = obs * fit.coefficients;
  return fit;
}

RieszFit overlap_riesz(const Eigen::Ref<const Eigen::MatrixXd>& design,
                       const Eigen::Ref<const Eigen::VectorXd>& weights) {
  if (design.rows() != weights.size()) throw InvalidInput("overlap_riesz: weight length mismatch");
  if ((weights.array() < 0.0).any() || !weights.allFinite()) {
    throw InvalidInput("overlap_riesz: weights must be finite and nonnegative");
  }
  if (!(weights.sum() > 0.0)) throw DegenerateDesign("overlap_riesz: all overlap weights are zero");
  const double n = static_cast<double>(design.rows());
  const Eigen::MatrixXd gram = design.transpose() * weights.asDiagonal() * design / n;
  const Eigen::VectorXd target = design.colwise().sum().transpose() / n;
  RieszFit fit;
  fit.coefficients = lasso::solve_gram(gram, target, &fit.rank_deficient);
  fit.values = design * fit.coefficients;
  return fit;
}

AteEstimate plug_in_admle(const Eigen::Ref<const Eigen::VectorXd>& Y,
                          const Eigen::Ref<const Eigen::VectorXd>& mu_obs,
                          const Eigen::Ref<const Eigen::VectorXd>& mu1,
                          const Eigen::Ref<const Eigen::VectorXd>& mu0,
                          const Eigen::Ref<const Eigen::VectorXd>& riesz, double alpha) {
  same_length({Y.size(), mu_obs.size(), mu1.size(), mu0.size(), riesz.size()});
  const Eigen::VectorXd contrast = mu1 - mu0;
  const double psi = contrast.mean();
  Eigen::VectorXd D = riesz.cwiseProduct(Y - mu_obs) + contrast;
  D.array() -= psi;
  return finish(Estimator::plug_in_admle, psi, std::move(D), alpha);
}

AteEstimate partially_linear_admle(const Eigen::Ref<const Eigen::VectorXd>& A,
                                   const Eigen::Ref<const Eigen::VectorXd>& Y,
                                   const Eigen::Ref<const Eigen::VectorXd>& pi,
                                   const Eigen::Ref<const Eigen::VectorXd>& m,
                                   const Eigen::Ref<const Eigen::VectorXd>& tau,
                                   const Eigen::Ref<const Eigen::VectorXd>& gamma, double alpha) {
  same_length({A.size(), Y.size(), pi.size(), m.size(), tau.size(), gamma.size()});
  const double psi = tau.mean();
  const Eigen::VectorXd resid_a = A - pi;
  const Eigen::VectorXd resid_y = Y - m - resid_a.cwiseProduct(tau);
  Eigen::VectorXd D = gamma.cwiseProduct(resid_a).cwiseProduct(resid_y) + tau;
  D.array() -= psi;
  return finish(Estimator::partially_linear_admle, psi, std::move(D), alpha);
}

AteEstimate semiparametric_intercept(const Eigen::Ref<const Eigen::VectorXd>& A,
                                     const Eigen::Ref<const Eigen::VectorXd>& Y,
                                     const Eigen::Ref<const Eigen::VectorXd>& pi,
                                     const Eigen::Ref<const Eigen::VectorXd>& m, double alpha) {
  same_length({A.size(), Y.size(), pi.size(), m.size()});
  const Eigen::VectorXd resid_a = A - pi;
  const double energy = resid_a.squaredNorm();
  const double n = static_cast<double>(A.size());
  if (!(energy > 1e-14 * n)) {
    throw DegenerateDesign("semiparametric_intercept: residualized treatment A - pi is identically zero");
  }
  const Eigen::VectorXd resid_y = Y - m;
  const double tau = resid_a.dot(resid_y) / energy;
  const double gamma = n / energy;
  Eigen::VectorXd D = gamma * resid_a.cwiseProduct(resid_y - tau * resid_a);
  auto est = finish(Estimator::semiparametric_intercept, tau, std::move(D), alpha);
  est.model_size = 1;
  return est;
}

AteEstimate aipw(const Eigen::Ref<const Eigen::VectorXd>& A, const Eigen::Ref<const Eigen::VectorXd>& Y,
                 const Eigen::Ref<const Eigen::VectorXd>& pi,
                 const Eigen::Ref<const Eigen::VectorXd>& mu1,
                 const Eigen::Ref<const Eigen::VectorXd>& mu0, double alpha) {
  same_length({A.size(), Y.size(), pi.size(), mu1.size(), mu0.size()});
  if ((pi.array() <= 0.0).any() || (pi.array() >= 1.0).any()) {
    throw InvalidInput("aipw: propensity scores must lie strictly inside (0, 1)");
  }
  const auto a = A.array();
  const Eigen::ArrayXd mu_obs = a * mu1.array() + (1.0 - a) * mu0.array();
  const Eigen::ArrayXd weight = a / pi.array() - (1.0 - a) / (1.0 - pi.array());
  Eigen::VectorXd summand = (mu1.array() - mu0.array() + weight * (Y.array() - mu_obs)).matrix();
  const double psi = summand.mean();
  summand.array() -= psi;
  return finish(Estimator::aipw, psi, std::move(summand), alpha);
}

AteEstimate plug_in_admle(const Dataset& data, const nuisance::OutcomeFit& outcome, double alpha) {
  const auto design = outcome.working_design(data.W, data.A);
  const auto treated = outcome.working_design_at(data.W, 1.0);
  const auto control = outcome.working_design_at(data.W, 0.0);
  const auto riesz = empirical_riesz(design, treated, control);
  const Eigen::VectorXd mu_obs = outcome.mu(data.W, data.A);
  auto est = plug_in_admle(data.Y, mu_obs, outcome.mu(data.W, 1.0), outcome.mu(data.W, 0.0), riesz.values,
                           alpha);
  est.model_size = outcome.working_dimension();
  return est;
}

AteEstimate partially_linear_admle(const Dataset& data, const nuisance::NuisanceBundle& bundle, double alpha) {
  if (!bundle.cate) throw InvalidInput("partially_linear_admle: nuisance bundle has no R-learner fit");
  const auto& cate = *bundle.cate;
  const Eigen::VectorXd weights = (data.A - bundle.pi()).cwiseAbs2();
  const auto riesz = overlap_riesz(cate.working_design(data.W), weights);
  auto est = partially_linear_admle(data.A, data.Y, bundle.pi(), bundle.m, cate.predict(data.W),
                                    riesz.values, alpha);
  est.model_size = cate.working_dimension();
  return est;
}

AteEstimate semiparametric_intercept(const Dataset& data, const nuisance::NuisanceBundle& bundle,
                                     double alpha) {
  return semiparametric_intercept(data.A, data.Y, bundle.pi(), bundle.m, alpha);
}

AteEstimate aipw(const Dataset& data, const nuisance::NuisanceBundle& bundle, double alpha) {
  return aipw(data.A, data.Y, bundle.pi(), bundle.mu1, bundle.mu0, alpha);
}

AteEstimate estimate(Estimator which, const Dataset& data, const nuisance::NuisanceBundle& bundle,
                     double alpha) {
  switch (which) {
    case Estimator::plug_in_admle: return plug_in_admle(data, bundle.outcome, alpha);
    case Estimator::partially_linear_admle: return partially_linear_admle(data, bundle, alpha);
    case Estimator::semiparametric_intercept: return semiparametric_intercept(data, bundle, alpha);
    case Estimator::aipw: return aipw(data, bundle, alpha);
  }
  throw InvalidInput("unknown estimator");
}

}  // namespace adml::estimators
