#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "adml/dataset.hpp"
#include "adml/hal_basis.hpp"
#include "adml/lasso.hpp"

namespace adml::nuisance {

struct NuisanceConfig {
  // Hinge knots per covariate in each additive block (control mean, CATE).
  std::size_t knots_per_covariate = 10;
  // Knots per covariate for the propensity regression.
  std::size_t propensity_knots = 10;
  std::vector<double> cutoff_grid = {1e-5, 1e-4, 1e-3, 0.005, 0.01, 0.02, 0.05, 0.1};
  int cv_folds = 10;
  std::uint64_t seed = 20240601;
  std::size_t lambda_count = 100;
  double lambda_ratio = 1e-4;
  // CATE-block penalty factors relative to the control block, searched
  // jointly with lambda when fitting the outcome regression.
  std::vector<double> cate_penalty_ratios = {0.25, 1.0, 4.0};
  // Replaces the data-driven lambda grid for every fit when nonempty.
  std::vector<double> lambda_override;
  lasso::SolverOptions solver;

  bool operator==(const NuisanceConfig&) const = default;
};

struct PropensityFit {
  basis::BasisSpec basis;
  lasso::LassoFit regression;  // relaxed least-squares fit of A on the basis
  double cutoff = 0.0;
  Eigen::VectorXd raw;     // regression predictions clipped to [0, 1]
  Eigen::VectorXd values;  // clipped to [cutoff, 1 - cutoff]
  bool degenerate = false;  // A was constant
  std::optional<double> known;  // supplied rather than estimated

  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& W) const;
};

// Empirical Riesz loss of the clipped inverse-propensity representer
//   (1/n) sum_i [alpha_c(A_i, W_i)^2 - 2 {alpha_c(1, W_i) - alpha_c(0, W_i)}]
// with alpha_c(a, w) = a / pi_c(w) - (1 - a) / (1 - pi_c(w)).
double truncation_loss(const Eigen::Ref<const Eigen::VectorXd>& raw,
                       const Eigen::Ref<const Eigen::VectorXd>& A, double cutoff);

// Grid cutoff minimizing truncation_loss; ties go to the smaller cutoff.
double select_truncation(const Eigen::Ref<const Eigen::VectorXd>& raw,
                         const Eigen::Ref<const Eigen::VectorXd>& A,
                         const std::vector<double>& grid);

PropensityFit fit_propensity(const Dataset& data, const basis::BasisSpec& basis,
                             const std::vector<double>& cutoff_grid, const lasso::CvPlan& plan,
                             const NuisanceConfig& config);

// Constant, known propensity (no truncation).
PropensityFit known_propensity(const Dataset& data, double value);

// mu(a, w) = intercept + phi(w)'theta + a (beta_a + phi(w)'tau), fitted as
// one Lasso over [phi(w), a, a phi(w)] followed by a relaxed refit. The
// intercept and the a column are never penalized, so the constant CATE model
// is always part of the working model.
struct OutcomeFit {
  basis::BasisSpec basis;  // covariate_only phi, shared by both blocks
  double intercept = 0.0;
  Eigen::VectorXd control_coefficients;
  double treatment_coefficient = 0.0;
  Eigen::VectorXd cate_coefficients;
  std::vector<Eigen::Index> control_support;  // indices into phi
  std::vector<Eigen::Index> cate_support;     // indices into phi
  double lambda = 0.0;
  double cate_penalty_ratio = 1.0;

  Eigen::VectorXd mu(const Eigen::Ref<const Eigen::MatrixXd>& W, double a) const;
  Eigen::VectorXd mu(const Eigen::Ref<const Eigen::MatrixXd>& W, const Eigen::VectorXd& A) const;
  Eigen::VectorXd cate(const Eigen::Ref<const Eigen::MatrixXd>& W) const;

  // Columns of the working model: [1, phi_S(w), a, a phi_T(w)].
  Eigen::MatrixXd working_design(const Eigen::Ref<const Eigen::MatrixXd>& W,
                                 const Eigen::VectorXd& A) const;
  Eigen::MatrixXd working_design_at(const Eigen::Ref<const Eigen::MatrixXd>& W, double a) const;
  std::size_t working_dimension() const { return 2 + control_support.size() + cate_support.size(); }
};

OutcomeFit fit_outcome_joint(const Dataset& data, const basis::BasisSpec& basis,
                             const lasso::CvPlan& plan, const NuisanceConfig& config);

// tau(w) = b0 + phi(w)'b with b supported on the selected columns.
struct CateFit {
  basis::BasisSpec basis;
  double intercept_coefficient = 0.0;
  Eigen::VectorXd coefficients;
  std::vector<Eigen::Index> support;  // indices into phi
  double lambda = 0.0;

  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& W) const;
  // [1, phi_S(w)], the span of the working CATE model.
  Eigen::MatrixXd working_design(const Eigen::Ref<const Eigen::MatrixXd>& W) const;
  std::size_t working_dimension() const { return 1 + support.size(); }
};

// Post-Lasso R-learner: regress Y - m on (A - pi)[1, phi(W)] without an
// intercept, the (A - pi) column unpenalized, then refit on the support.
CateFit rlearner_fit(const Dataset& data, const Eigen::VectorXd& pi, const Eigen::VectorXd& m,
                     const basis::BasisSpec& basis, const lasso::CvPlan& plan,
                     const NuisanceConfig& config);

// m(w) = pi(w) mu(1, w) + (1 - pi(w)) mu(0, w)
Eigen::VectorXd compute_m(const Eigen::VectorXd& pi, const Eigen::VectorXd& mu1,
                          const Eigen::VectorXd& mu0);

struct NuisanceBundle {
  PropensityFit propensity;
  OutcomeFit outcome;
  Eigen::VectorXd mu1;  // mu_n(1, W_i)
  Eigen::VectorXd mu0;  // mu_n(0, W_i)
  Eigen::VectorXd m;
  std::optional<CateFit> cate;  // present when the R-learner was run
  NuisanceConfig config;

  const Eigen::VectorXd& pi() const { return propensity.values; }
};

struct FitRequest {
  bool need_propensity = true;
  bool need_cate = true;
  std::optional<double> known_propensity;
};

lasso::CvPlan make_plan(const Dataset& data, const NuisanceConfig& config);

// Full pipeline on one sample. Throws DegenerateDesign when A is constant
// and a propensity is needed. Samples with fewer rows than cv_folds skip
// selection: every fit keeps only its unpenalized columns.
NuisanceBundle fit_nuisances(const Dataset& data, const NuisanceConfig& config,
                             const FitRequest& request = {});

}  // namespace adml::nuisance
