#include <doctest.h>

#include <cmath>
#include <random>

#include "adml/dgp.hpp"
#include "adml/errors.hpp"
#include "adml/estimators.hpp"
#include "adml/lasso.hpp"
#include "adml/normal.hpp"
#include "adml/nuisance.hpp"
#include "helpers.hpp"

using namespace adml;
using namespace adml::estimators;

namespace {

struct ArmDesigns {
  Eigen::MatrixXd observed;
  Eigen::MatrixXd treated;
  Eigen::MatrixXd control;
};

// [1, x, a, a x]
ArmDesigns interacted(const Eigen::VectorXd& x, const Eigen::VectorXd& a) {
  const auto n = x.size();
  auto make = [&](const Eigen::VectorXd& t) {
    Eigen::MatrixXd out(n, 4);
    out << Eigen::VectorXd::Ones(n), x, t, t.cwiseProduct(x);
    return out;
  };
  return {make(a), make(Eigen::VectorXd::Ones(n)), make(Eigen::VectorXd::Zero(n))};
}

}  // namespace

TEST_CASE("empirical Riesz on (1, a) gives the IPW weights") {
  Eigen::VectorXd A(8);
  A << 1, 0, 1, 0, 0, 1, 1, 0;
  Eigen::MatrixXd obs(8, 2), t1(8, 2), t0(8, 2);
  obs << Eigen::VectorXd::Ones(8), A;
  t1 << Eigen::VectorXd::Ones(8), Eigen::VectorXd::Ones(8);
  t0 << Eigen::VectorXd::Ones(8), Eigen::VectorXd::Zero(8);
  const auto fit = empirical_riesz(obs, t1, t0);
  CHECK(std::abs(fit.coefficients[0] + 2.0) <= 1e-10);
  CHECK(std::abs(fit.coefficients[1] - 4.0) <= 1e-10);
  for (Eigen::Index i = 0; i < 8; ++i) CHECK(std::abs(fit.values[i] - (A[i] == 1.0 ? 2.0 : -2.0)) <= 1e-10);
}

TEST_CASE("empirical Riesz satisfies its normal equations") {
  std::mt19937_64 rng(31);
  const Eigen::VectorXd x = testing::uniform(100, -1, 1, rng);
  const Eigen::VectorXd a = testing::bernoulli(100, 0.4, rng);
  const auto d = interacted(x, a);
  const auto fit = empirical_riesz(d.observed, d.treated, d.control);
  const Eigen::VectorXd lhs = d.observed.transpose() * fit.values / 100.0;
  const Eigen::VectorXd rhs = (d.treated - d.control).colwise().mean().transpose();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("a basis without treatment-varying columns has a zero representer") {
  std::mt19937_64 rng(32);
  Eigen::MatrixXd phi(30, 2);
  phi << Eigen::VectorXd::Ones(30), testing::uniform(30, -1, 1, rng);
  const auto fit = empirical_riesz(phi, phi, phi);
  CHECK(fit.coefficients.isZero(0.0));
  CHECK(fit.values.isZero(0.0));
}

TEST_CASE("overlap Riesz on the constant basis is n over the weight sum") {
  const Eigen::MatrixXd one = Eigen::VectorXd::Ones(10);
  const auto quarter = overlap_riesz(one, Eigen::VectorXd::Constant(10, 0.25));
  CHECK(std::abs(quarter.coefficients[0] - 4.0) <= 1e-10);

  std::mt19937_64 rng(33);
  const Eigen::VectorXd w = testing::uniform(10, 0.01, 0.9, rng);
  const auto fit = overlap_riesz(one, w);
  CHECK(std::abs(fit.coefficients[0] - 10.0 / w.sum()) <= 1e-10);

  Eigen::VectorXd A(4);
  A << 1, 0, 0, 1;
  const Eigen::VectorXd half_weights = (A.array() - 0.5).square().matrix();
  const Eigen::MatrixXd one4 = Eigen::VectorXd::Ones(4);
  CHECK(std::abs(overlap_riesz(one4, half_weights).coefficients[0] - 4.0) <= 1e-10);

  CHECK_THROWS_AS(overlap_riesz(one4, Eigen::VectorXd::Zero(4)), DegenerateDesign);
}

TEST_CASE("overlap Riesz on saturated indicators solves blockwise") {
  std::mt19937_64 rng(34);
  std::uniform_int_distribution<int> cell(0, 2);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(60, 3);
  std::vector<int> label(60);
  for (int i = 0; i < 60; ++i) {
    label[static_cast<std::size_t>(i)] = cell(rng);
    D(i, label[static_cast<std::size_t>(i)]) = 1.0;
  }
  const Eigen::VectorXd w = testing::uniform(60, 0.05, 0.5, rng);
  const auto fit = overlap_riesz(D, w);
  for (int c = 0; c < 3; ++c) {
    double count = 0.0;
    double mass = 0.0;
    for (int i = 0; i < 60; ++i) {
      if (label[static_cast<std::size_t>(i)] == c) {
        count += 1.0;
        mass += w[i];
      }
    }
    for (int i = 0; i < 60; ++i) {
      if (label[static_cast<std::size_t>(i)] == c) CHECK(fit.values[i] == doctest::Approx(count / mass).epsilon(1e-10));
    }
  }
  const Eigen::VectorXd lhs = D.transpose() * w.cwiseProduct(fit.values);
  const Eigen::VectorXd rhs = D.colwise().sum().transpose();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("plug-in on (1, a) is the difference in means") {
  std::mt19937_64 rng(35);
  const Eigen::VectorXd A = testing::bernoulli(50, 0.5, rng);
  const Eigen::VectorXd Y = testing::gaussian(50, 1, rng) + 2.0 * A;
  const double m1 = A.dot(Y) / A.sum();
  const double m0 = (Eigen::VectorXd::Ones(50) - A).dot(Y) / (50.0 - A.sum());
  Eigen::MatrixXd obs(50, 2), t1(50, 2), t0(50, 2);
  obs << Eigen::VectorXd::Ones(50), A;
  t1 << Eigen::VectorXd::Ones(50), Eigen::VectorXd::Ones(50);
  t0 << Eigen::VectorXd::Ones(50), Eigen::VectorXd::Zero(50);
  const Eigen::VectorXd mu1 = Eigen::VectorXd::Constant(50, m1);
  const Eigen::VectorXd mu0 = Eigen::VectorXd::Constant(50, m0);
  const Eigen::VectorXd mu_obs = (A.array() * m1 + (1.0 - A.array()) * m0).matrix();
  const auto riesz = empirical_riesz(obs, t1, t0);
  const auto est = plug_in_admle(Y, mu_obs, mu1, mu0, riesz.values, 0.05);
  CHECK(est.psi == doctest::Approx(m1 - m0).epsilon(1e-12));
  CHECK(std::abs(est.if_values.mean()) <= 1e-8);

  const Eigen::VectorXd pbar = Eigen::VectorXd::Constant(50, A.mean());
  const auto ipw = aipw(A, Y, pbar, mu1, mu0, 0.05);
  CHECK(std::abs(ipw.psi - est.psi) <= 1e-8);
}

TEST_CASE("plug-in on a least-squares fit is self-debiasing") {
  std::mt19937_64 rng(36);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::VectorXd x = testing::uniform(120, -1, 1, rng);
    const Eigen::VectorXd a = testing::bernoulli(120, 0.3, rng);
    const Eigen::VectorXd Y = x.array().square().matrix() + a.cwiseProduct(x) + testing::gaussian(120, 1, rng);
    const auto d = interacted(x, a);
    const auto ols = lasso::solve_wls(d.observed, Y, nullptr, false);
    const Eigen::VectorXd mu_obs = d.observed * ols.coefficients;
    const Eigen::VectorXd mu1 = d.treated * ols.coefficients;
    const Eigen::VectorXd mu0 = d.control * ols.coefficients;
    const auto riesz = empirical_riesz(d.observed, d.treated, d.control);
    const auto est = plug_in_admle(Y, mu_obs, mu1, mu0, riesz.values, 0.05);
    CHECK(std::abs(est.if_values.mean()) <= 1e-8);
    const double aipw_form = (riesz.values.cwiseProduct(Y - mu_obs) + mu1 - mu0).mean();
    CHECK(std::abs(aipw_form - est.psi) <= 1e-8);

    // Sandwich for psi = b'beta with beta the OLS coefficients, working model held fixed.
    const double n = 120.0;
    const Eigen::MatrixXd G = d.observed.transpose() * d.observed / n;
    const Eigen::VectorXd b = (d.treated - d.control).colwise().mean().transpose();
    const Eigen::VectorXd h = G.ldlt().solve(b);
    const Eigen::VectorXd r = Y - mu_obs;
    const Eigen::VectorXd c = (mu1 - mu0).array() - est.psi;
    const Eigen::MatrixXd meat = d.observed.transpose() * r.cwiseAbs2().asDiagonal() * d.observed / n;
    const Eigen::VectorXd cross = d.observed.transpose() * r.cwiseProduct(c) / n;
    const double sandwich = h.dot(meat * h) + c.squaredNorm() / n + 2.0 * h.dot(cross);
    CHECK(est.sigma * est.sigma == doctest::Approx(sandwich).epsilon(1e-10));
  }
}

TEST_CASE("plug-in with a constant outcome is zero") {
  std::mt19937_64 rng(37);
  const Eigen::VectorXd A = testing::bernoulli(20, 0.5, rng);
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(20, 3.0);
  const auto est = plug_in_admle(c, c, c, c, Eigen::VectorXd::Ones(20), 0.05);
  CHECK(est.psi == 0.0);
  CHECK(est.sigma == 0.0);
}

TEST_CASE("partially linear with a constant basis equals the semiparametric intercept") {
  std::mt19937_64 rng(38);
  const Eigen::VectorXd pi = testing::uniform(200, 0.2, 0.8, rng);
  Eigen::VectorXd A(200);
  for (Eigen::Index i = 0; i < 200; ++i) A[i] = testing::uniform(1, 0, 1, rng)[0] < pi[i] ? 1.0 : 0.0;
  const Eigen::VectorXd m = testing::gaussian(200, 1, rng);
  const Eigen::VectorXd Y = m + 1.7 * (A - pi) + testing::gaussian(200, 1, rng);

  const auto si = semiparametric_intercept(A, Y, pi, m, 0.05);
  const Eigen::VectorXd resid_a = A - pi;
  CHECK(si.psi == doctest::Approx(resid_a.dot(Y - m) / resid_a.squaredNorm()).epsilon(1e-12));

  const Eigen::MatrixXd one = Eigen::VectorXd::Ones(200);
  const Eigen::VectorXd w = resid_a.cwiseAbs2();
  const auto gamma = overlap_riesz(one, w);
  const Eigen::VectorXd tau = Eigen::VectorXd::Constant(200, si.psi);
  const auto pl = partially_linear_admle(A, Y, pi, m, tau, gamma.values, 0.05);
  CHECK(std::abs(pl.psi - si.psi) <= 1e-10);
  CHECK((pl.if_values - si.if_values).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(std::abs(pl.if_values.mean()) <= 1e-8);
}

TEST_CASE("noiseless partially linear data recover the effect exactly") {
  std::mt19937_64 rng(39);
  const Eigen::VectorXd pi = testing::uniform(100, 0.2, 0.8, rng);
  const Eigen::VectorXd A = testing::bernoulli(100, 0.5, rng);
  const Eigen::VectorXd m = testing::gaussian(100, 1, rng);
  const Eigen::VectorXd Y = m + 2.5 * (A - pi);
  CHECK(std::abs(semiparametric_intercept(A, Y, pi, m, 0.05).psi - 2.5) <= 1e-12);

  const Eigen::VectorXd x = testing::uniform(100, -1, 1, rng);
  const Eigen::VectorXd tau = (1.0 + 2.0 * x.array()).matrix();
  const Eigen::VectorXd Y2 = m + (A - pi).cwiseProduct(tau);
  Eigen::MatrixXd design(100, 2);
  design << Eigen::VectorXd::Ones(100), x;
  const auto gamma = overlap_riesz(design, (A - pi).cwiseAbs2());
  const auto pl = partially_linear_admle(A, Y2, pi, m, tau, gamma.values, 0.05);
  CHECK(pl.psi == doctest::Approx(tau.mean()).epsilon(1e-14));
  CHECK(std::abs(pl.if_values.mean()) <= 1e-12);
}

TEST_CASE("semiparametric intercept rejects a vanishing residualized treatment") {
  const Eigen::VectorXd A = Eigen::VectorXd::Ones(10);
  CHECK_THROWS_AS(semiparametric_intercept(A, A, A, A, 0.05), DegenerateDesign);
}

TEST_CASE("AIPW examples") {
  std::mt19937_64 rng(40);
  const Eigen::VectorXd A = testing::bernoulli(40, 0.5, rng);
  const Eigen::VectorXd Y = testing::gaussian(40, 1, rng);
  const Eigen::VectorXd half = Eigen::VectorXd::Constant(40, 0.5);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(40);
  const auto est = aipw(A, Y, half, zero, zero, 0.05);
  const double expected = 2.0 * A.cwiseProduct(Y).mean() - 2.0 * (1.0 - A.array()).matrix().cwiseProduct(Y).mean();
  CHECK(est.psi == doctest::Approx(expected).epsilon(1e-14));
  CHECK(aipw(A, zero, half, zero, zero, 0.05).psi == 0.0);

  const Eigen::VectorXd mu0 = testing::gaussian(40, 1, rng);
  const Eigen::VectorXd mu1 = mu0.array() + 1.0 + testing::uniform(40, 0, 1, rng).array();
  const Eigen::VectorXd Yn = (A.array() * mu1.array() + (1.0 - A.array()) * mu0.array()).matrix();
  const Eigen::VectorXd pi = testing::uniform(40, 0.1, 0.9, rng);
  CHECK(aipw(A, Yn, pi, mu1, mu0, 0.05).psi == doctest::Approx((mu1 - mu0).mean()).epsilon(1e-14));
  CHECK_THROWS_AS(aipw(A, Y, zero, zero, zero, 0.05), InvalidInput);
}

TEST_CASE("confidence interval examples") {
  const auto zero = confidence_interval(1.5, Eigen::VectorXd::Zero(5), 0.05);
  CHECK(zero.sigma == 0.0);
  CHECK(zero.lower == 1.5);
  CHECK(zero.upper == 1.5);

  const auto pm = confidence_interval(0.0, Eigen::Vector2d(-1.0, 1.0), 0.05);
  CHECK(pm.sigma == doctest::Approx(1.0));
  CHECK(pm.upper == doctest::Approx(1.959963984540054 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(pm.lower == doctest::Approx(-pm.upper));

  const auto narrow = confidence_interval(0.0, Eigen::Vector2d(-1.0, 1.0), 0.1);
  CHECK(narrow.upper < pm.upper);
  CHECK_THROWS_AS(confidence_interval(0.0, Eigen::VectorXd(0), 0.05), InvalidInput);
  CHECK_THROWS_AS(confidence_interval(0.0, Eigen::Vector2d(1, 1), 1.0), InvalidInput);
}

TEST_CASE("fitted pipeline estimates satisfy their identities") {
  sim::DgpSpec spec;
  const auto data = sim::sample_dgp(spec, 200, 41);
  nuisance::NuisanceConfig config;
  config.knots_per_covariate = 5;
  config.propensity_knots = 5;
  const auto bundle = nuisance::fit_nuisances(data, config);

  const auto pl = estimate(Estimator::partially_linear_admle, data, bundle, 0.05);
  CHECK(std::abs(pl.if_values.mean()) <= 1e-8);
  CHECK(pl.model_size == bundle.cate->working_dimension());

  const auto pi = estimate(Estimator::plug_in_admle, data, bundle, 0.05);
  CHECK(std::abs(pi.if_values.mean()) <= 1e-8);
  CHECK(pi.model_size == bundle.outcome.working_dimension());

  for (auto e : {Estimator::plug_in_admle, Estimator::partially_linear_admle,
                 Estimator::semiparametric_intercept, Estimator::aipw}) {
    const auto est = estimate(e, data, bundle, 0.05);
    CHECK(est.sigma * est.sigma == doctest::Approx(est.if_values.squaredNorm() / 200.0).epsilon(1e-12));
    const double half = normal_quantile(0.975) * est.sigma / std::sqrt(200.0);
    CHECK(est.ci_upper - est.psi == doctest::Approx(half).epsilon(1e-12));
    CHECK(parse_estimator(to_string(e)) == e);
  }
  CHECK_FALSE(parse_estimator("ipw").has_value());
}
