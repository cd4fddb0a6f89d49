#pragma once

#include <optional>
#include <string_view>

#include <Eigen/Dense>

#include "adml/dataset.hpp"
#include "adml/nuisance.hpp"

namespace adml::estimators {

enum class Estimator {
  plug_in_admle,
  partially_linear_admle,
  semiparametric_intercept,
  aipw,
};

std::string_view to_string(Estimator e);
std::optional<Estimator> parse_estimator(std::string_view name);

// Point estimate with its estimated influence function and the Wald
// interval psi -/+ q sigma / sqrt(n), sigma^2 = (1/n) sum D_i^2.
struct AteEstimate {
  double psi = 0.0;
  Eigen::VectorXd if_values;
  double sigma = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double alpha = 0.05;
  Estimator estimator = Estimator::aipw;
  Eigen::Index n = 0;
  // Dimension of the working model behind the estimate (0 for AIPW).
  std::size_t model_size = 0;
};

struct Interval {
  double sigma = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

Interval confidence_interval(double psi, const Eigen::Ref<const Eigen::VectorXd>& if_values, double alpha);

struct RieszFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd values;  // alpha_n(A_i, W_i) or gamma_n(W_i)
  bool rank_deficient = false;
};

// Least-squares Riesz representer of theta -> E{theta(1,W) - theta(0,W)} over
// the span of the working design: G c = b with G = Phi'Phi / n and
// b = mean(Phi(1,W) - Phi(0,W)).
RieszFit empirical_riesz(const Eigen::Ref<const Eigen::MatrixXd>& design_observed,
                         const Eigen::Ref<const Eigen::MatrixXd>& design_treated,
                         const Eigen::Ref<const Eigen::MatrixXd>& design_control);

// Overlap-weighted representer: sum_i w_i phi_i phi_i' c = sum_i phi_i.
RieszFit overlap_riesz(const Eigen::Ref<const Eigen::MatrixXd>& cate_design,
                       const Eigen::Ref<const Eigen::VectorXd>& weights);

AteEstimate plug_in_admle(const Eigen::Ref<const Eigen::VectorXd>& Y,
                          const Eigen::Ref<const Eigen::VectorXd>& mu_observed,
                          const Eigen::Ref<const Eigen::VectorXd>& mu1,
                          const Eigen::Ref<const Eigen::VectorXd>& mu0,
                          const Eigen::Ref<const Eigen::VectorXd>& riesz, double alpha);

AteEstimate partially_linear_admle(const Eigen::Ref<const Eigen::VectorXd>& A,
                                   const Eigen::Ref<const Eigen::VectorXd>& Y,
                                   const Eigen::Ref<const Eigen::VectorXd>& pi,
                                   const Eigen::Ref<const Eigen::VectorXd>& m,
                                   const Eigen::Ref<const Eigen::VectorXd>& tau,
                                   const Eigen::Ref<const Eigen::VectorXd>& gamma, double alpha);

AteEstimate semiparametric_intercept(const Eigen::Ref<const Eigen::VectorXd>& A,
                                     const Eigen::Ref<const Eigen::VectorXd>& Y,
                                     const Eigen::Ref<const Eigen::VectorXd>& pi,
                                     const Eigen::Ref<const Eigen::VectorXd>& m, double alpha);

AteEstimate aipw(const Eigen::Ref<const Eigen::VectorXd>& A, const Eigen::Ref<const Eigen::VectorXd>& Y,
                 const Eigen::Ref<const Eigen::VectorXd>& pi,
                 const Eigen::Ref<const Eigen::VectorXd>& mu1,
                 const Eigen::Ref<const Eigen::VectorXd>& mu0, double alpha);

// Convenience wrappers over a fitted NuisanceBundle.
AteEstimate plug_in_admle(const Dataset& data, const nuisance::OutcomeFit& outcome, double alpha);
AteEstimate partially_linear_admle(const Dataset& data, const nuisance::NuisanceBundle& bundle,
                                   double alpha);
AteEstimate semiparametric_intercept(const Dataset& data, const nuisance::NuisanceBundle& bundle,
                                     double alpha);
AteEstimate aipw(const Dataset& data, const nuisance::NuisanceBundle& bundle, double alpha);

AteEstimate estimate(Estimator which, const Dataset& data, const nuisance::NuisanceBundle& bundle,
                     double alpha);

}  // namespace adml::estimators
