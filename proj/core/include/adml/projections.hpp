#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

#include "adml/dgp.hpp"
#include "adml/hal_basis.hpp"

namespace adml::projections {

// Monte Carlo value with its standard error.
struct McValue {
  double value = 0.0;
  double se = 0.0;
};

// N covariate draws from a known design, shared by every population quantity
// computed from it (common random numbers). Expectations over A given W are
// taken exactly: E f(A, W) = E_W{pi f(1, W) + (1 - pi) f(0, W)}.
class PopulationOracle {
 public:
  PopulationOracle(const sim::DgpSpec& dgp, std::size_t mc_size, std::uint64_t seed);

  const sim::DgpSpec& dgp() const { return dgp_; }
  Eigen::Index size() const { return W_.rows(); }
  const Eigen::MatrixXd& W() const { return W_; }
  const Eigen::VectorXd& propensity() const { return pi_; }
  const Eigen::VectorXd& control_mean() const { return mu0_; }
  const Eigen::VectorXd& cate() const { return tau_; }
  // pi (1 - pi)
  const Eigen::VectorXd& overlap_weight() const { return overlap_; }

 private:
  sim::DgpSpec dgp_;
  Eigen::MatrixXd W_;
  Eigen::VectorXd pi_;
  Eigen::VectorXd mu0_;
  Eigen::VectorXd tau_;
  Eigen::VectorXd overlap_;
};

struct Projection {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd values;  // fitted function at every oracle draw (W-only bases)
  bool rank_deficient = false;
  double normal_equation_residual = 0.0;  // ||G c - b||_inf
};

McValue true_ate(const PopulationOracle& oracle);
McValue true_ate(const sim::DgpSpec& dgp, std::size_t mc_size, std::uint64_t seed);

// --- Partially linear working models; bases over W only. ---

// Overlap-weighted projection of the CATE: E[w0 phi phi'] c = E[w0 phi tau0].
Projection population_projection_cate(const PopulationOracle& oracle, const basis::BasisSpec& cate_basis);

// E[w0 phi phi'] c = E[phi], the w0-weighted projection of 1 / w0.
Projection population_overlap_riesz(const PopulationOracle& oracle, const basis::BasisSpec& cate_basis);

// E[Pi_n tau0(W)].
McValue working_estimand(const PopulationOracle& oracle, const basis::BasisSpec& cate_basis);

// E[(gamma0 - Pi_n gamma0) (A - pi0)^2 (Pi_n tau0 - tau0)], gamma0 taken as the
// overlap Riesz representer of the oracle basis.
McValue oracle_bias_partially_linear(const PopulationOracle& oracle, const basis::BasisSpec& cate_basis,
                                     const basis::BasisSpec& oracle_basis);

// --- Regression working models; treatment_interacted bases over (A, W). ---

// Least-squares projection of mu0 onto the basis.
Projection population_projection_outcome(const PopulationOracle& oracle, const basis::BasisSpec& basis);

// Riesz representer of the ATE functional over the basis.
Projection population_riesz(const PopulationOracle& oracle, const basis::BasisSpec& basis);

// E[Pi mu0(1, W) - Pi mu0(0, W)]; with the oracle basis this is the oracle estimand.
McValue working_estimand_plug_in(const PopulationOracle& oracle, const basis::BasisSpec& basis);

struct PlugInBias {
  McValue bias;                 // E[(alpha0 - Pi_n alpha0)(Pi_n mu0 - mu0)]
  double riesz_residual_norm;   // ||alpha0 - Pi_n alpha0||
  double outcome_residual_norm; // ||mu0 - Pi_n mu0||
};

PlugInBias oracle_bias_plug_in(const PopulationOracle& oracle, const basis::BasisSpec& working_basis,
                               const basis::BasisSpec& oracle_basis);

}  // namespace adml::projections
