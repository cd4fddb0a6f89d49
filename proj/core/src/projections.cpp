#include "adml/projections.hpp"

#include <algorithm>
#include <cmath>

#include "adml/errors.hpp"
#include "adml/lasso.hpp"

namespace adml::projections {

namespace {

constexpr Eigen::Index kChunk = 8192;

template <class F>
void for_chunks(Eigen::Index total, F&& f) {
  for (Eigen::Index start = 0; start < total; start += kChunk) {
    f(start, std::min(kChunk, total - start));
  }
}

McValue mc_mean(const Eigen::VectorXd& v) {
  const double n = static_cast<double>(v.size());
  const double mean = v.mean();
  const double var = v.size() > 1 ? (v.array() - mean).square().sum() / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

struct System {
  Eigen::MatrixXd gram;
  Eigen::VectorXd rhs;
};

Projection solve(const System& sys) {
  Projection out;
  out.coefficients = lasso::solve_gram(sys.gram, sys.rhs, &out.rank_deficient);
  out.normal_equation_residual =
      sys.gram.rows() == 0 ? 0.0 : (sys.gram * out.coefficients - sys.rhs).cwiseAbs().maxCoeff();
  return out;
}

void require_w_basis(const basis::BasisSpec& spec) {
  if (spec.block != basis::Block::covariate_only) {
    throw InvalidInput("partially linear projections need a covariate_only basis");
  }
}

void require_aw_basis(const basis::BasisSpec& spec) {
  if (spec.block != basis::Block::treatment_interacted) {
    throw InvalidInput("regression projections need a treatment_interacted basis");
  }
}

// E[weight phi phi'] and E[weight phi target] (or E[phi] when target is null).
System w_system(const PopulationOracle& oracle, const basis::BasisSpec& spec, const Eigen::VectorXd& weight,
                const Eigen::VectorXd* target) {
  const auto p = static_cast<Eigen::Index>(spec.column_count());
  System sys{Eigen::MatrixXd::Zero(p, p), Eigen::VectorXd::Zero(p)};
  for_chunks(oracle.size(), [&](Eigen::Index start, Eigen::Index rows) {
    const auto phi = basis::expand(spec, oracle.W().middleRows(start, rows)).values;
    const auto w = weight.segment(start, rows);
    const Eigen::MatrixXd weighted = phi.array().colwise() * w.array();
    sys.gram.noalias() += weighted.transpose() * phi;
    if (target) {
      sys.rhs.noalias() += weighted.transpose() * target->segment(start, rows);
    } else {
      sys.rhs += phi.colwise().sum().transpose();
    }
  });
  const double n = static_cast<double>(oracle.size());
  sys.gram /= n;
  sys.rhs /= n;
  return sys;
}

Eigen::VectorXd evaluate_w(const PopulationOracle& oracle, const basis::BasisSpec& spec,
                           const Eigen::VectorXd& coef) {
  Eigen::VectorXd out(oracle.size());
  for_chunks(oracle.size(), [&](Eigen::Index start, Eigen::Index rows) {
    out.segment(start, rows) = basis::expand(spec, oracle.W().middleRows(start, rows)).values * coef;
  });
  return out;
}

struct ArmValues {
  Eigen::VectorXd treated;
  Eigen::VectorXd control;
};

// E_W[pi phi1 phi1' + (1 - pi) phi0 phi0'] with the matching right-hand side:
// targets given per arm, or E[phi1 - phi0] (the ATE functional) when null.
System aw_system(const PopulationOracle& oracle, const basis::BasisSpec& spec, const ArmValues* target) {
  const auto p = static_cast<Eigen::Index>(spec.column_count());
  System sys{Eigen::MatrixXd::Zero(p, p), Eigen::VectorXd::Zero(p)};
  for_chunks(oracle.size(), [&](Eigen::Index start, Eigen::Index rows) {
    const auto W = oracle.W().middleRows(start, rows);
    const auto phi1 = basis::expand_at(spec, W, 1.0).values;
    const auto phi0 = basis::expand_at(spec, W, 0.0).values;
    const Eigen::ArrayXd pi = oracle.propensity().segment(start, rows).array();
    const Eigen::MatrixXd w1 = phi1.array().colwise() * pi;
    const Eigen::MatrixXd w0 = phi0.array().colwise() * (1.0 - pi);
    sys.gram.noalias() += w1.transpose() * phi1;
    sys.gram.noalias() += w0.transpose() * phi0;
    if (target) {
      sys.rhs.noalias() += w1.transpose() * target->treated.segment(start, rows);
      sys.rhs.noalias() += w0.transpose() * target->control.segment(start, rows);
    } else {
      sys.rhs += (phi1 - phi0).colwise().sum().transpose();
    }
  });
  const double n = static_cast<double>(oracle.size());
  sys.gram /= n;
  sys.rhs /= n;
  return sys;
}

ArmValues evaluate_aw(const PopulationOracle& oracle, const basis::BasisSpec& spec, const Eigen::VectorXd& coef) {
  ArmValues out{Eigen::VectorXd(oracle.size()), Eigen::VectorXd(oracle.size())};
  for_chunks(oracle.size(), [&](Eigen::Index start, Eigen::Index rows) {
    const auto W = oracle.W().middleRows(start, rows);
    out.treated.segment(start, rows) = basis::expand_at(spec, W, 1.0).values * coef;
    out.control.segment(start, rows) = basis::expand_at(spec, W, 0.0).values * coef;
  });
  return out;
}

ArmValues true_outcome(const PopulationOracle& oracle) {
  return {oracle.control_mean() + oracle.cate(), oracle.control_mean()};
}

}  // namespace

PopulationOracle::PopulationOracle(const sim::DgpSpec& dgp, std::size_t mc_size, std::uint64_t seed)
    : dgp_(dgp) {
  if (mc_size == 0) throw InvalidInput("population oracle needs at least one draw");
  // Reuse the simulation sampler for W; A and Y are integrated out analytically.
  W_ = sim::sample_dgp(dgp, mc_size, seed).W;
  pi_ = dgp.propensity(W_);
  mu0_ = dgp.control_mean(W_);
  tau_ = dgp.cate(W_);
  overlap_ = pi_.cwiseProduct((1.0 - pi_.array()).matrix());
}

McValue true_ate(const PopulationOracle& oracle) { return mc_mean(oracle.cate()); }

McValue true_ate(const sim::DgpSpec& dgp, std::size_t mc_size, std::uint64_t seed) {
  if (mc_size == 0) throw InvalidInput("true_ate needs at least one draw");
  return mc_mean(dgp.cate(sim::sample_dgp(dgp, mc_size, seed).W));
}

Projection population_projection_cate(const PopulationOracle& oracle, const basis::BasisSpec& spec) {
  require_w_basis(spec);
  auto proj = solve(w_system(oracle, spec, oracle.overlap_weight(), &oracle.cate()));
  proj.values = evaluate_w(oracle, spec, proj.coefficients);
  return proj;
}

Projection population_overlap_riesz(const PopulationOracle& oracle, const basis::BasisSpec& spec) {
  require_w_basis(spec);
  if (!(oracle.overlap_weight().sum() > 0.0)) throw DegenerateDesign("overlap weights vanish");
  auto proj = solve(w_system(oracle, spec, oracle.overlap_weight(), nullptr));
  proj.values = evaluate_w(oracle, spec, proj.coefficients);
  return proj;
}

McValue working_estimand(const PopulationOracle& oracle, const basis::BasisSpec& spec) {
  if (!(oracle.overlap_weight().sum() > 0.0)) throw DegenerateDesign("overlap weights vanish");
  return mc_mean(population_projection_cate(oracle, spec).values);
}

McValue oracle_bias_partially_linear(const PopulationOracle& oracle, const basis::BasisSpec& working,
                                     const basis::BasisSpec& oracle_basis) {
  require_w_basis(working);
  require_w_basis(oracle_basis);
  const auto& w0 = oracle.overlap_weight();
  const auto gamma = population_overlap_riesz(oracle, oracle_basis);
  auto gamma_proj = solve(w_system(oracle, working, w0, &gamma.values));
  gamma_proj.values = evaluate_w(oracle, working, gamma_proj.coefficients);
  const auto tau_proj = population_projection_cate(oracle, working);
  const Eigen::VectorXd integrand = w0.cwiseProduct(gamma.values - gamma_proj.values)
                                        .cwiseProduct(tau_proj.values - oracle.cate());
  return mc_mean(integrand);
}

Projection population_projection_outcome(const PopulationOracle& oracle, const basis::BasisSpec& spec) {
  require_aw_basis(spec);
  const auto target = true_outcome(oracle);
  return solve(aw_system(oracle, spec, &target));
}

Projection population_riesz(const PopulationOracle& oracle, const basis::BasisSpec& spec) {
  require_aw_basis(spec);
  return solve(aw_system(oracle, spec, nullptr));
}

McValue working_estimand_plug_in(const PopulationOracle& oracle, const basis::BasisSpec& spec) {
  const auto proj = population_projection_outcome(oracle, spec);
  const auto arms = evaluate_aw(oracle, spec, proj.coefficients);
  return mc_mean(arms.treated - arms.control);
}

PlugInBias oracle_bias_plug_in(const PopulationOracle& oracle, const basis::BasisSpec& working,
                               const basis::BasisSpec& oracle_basis) {
  require_aw_basis(working);
  require_aw_basis(oracle_basis);
  const auto riesz = population_riesz(oracle, oracle_basis);
  const auto alpha = evaluate_aw(oracle, oracle_basis, riesz.coefficients);
  const auto alpha_proj_coef = solve(aw_system(oracle, working, &alpha)).coefficients;
  const auto alpha_proj = evaluate_aw(oracle, working, alpha_proj_coef);
  const auto mu_proj = evaluate_aw(oracle, working, population_projection_outcome(oracle, working).coefficients);
  const auto mu = true_outcome(oracle);

  const Eigen::ArrayXd pi = oracle.propensity().array();
  const Eigen::ArrayXd d1 = (alpha.treated - alpha_proj.treated).array();
  const Eigen::ArrayXd d0 = (alpha.control - alpha_proj.control).array();
  const Eigen::ArrayXd e1 = (mu_proj.treated - mu.treated).array();
  const Eigen::ArrayXd e0 = (mu_proj.control - mu.control).array();

  PlugInBias out;
  out.bias = mc_mean((pi * d1 * e1 + (1.0 - pi) * d0 * e0).matrix());
  out.riesz_residual_norm = std::sqrt((pi * d1.square() + (1.0 - pi) * d0.square()).mean());
  out.outcome_residual_norm = std::sqrt((pi * e1.square() + (1.0 - pi) * e0.square()).mean());
  return out;
}

}  // namespace adml::projections
