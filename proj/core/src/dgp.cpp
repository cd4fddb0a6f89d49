#include "adml/dgp.hpp"

#include <cmath>
#include <random>

#include "adml/errors.hpp"

namespace adml::sim {

std::string_view to_string(OutcomeForm form) {
  return form == OutcomeForm::linear ? "linear" : "nonlinear";
}

std::optional<OutcomeForm> parse_outcome_form(std::string_view name) {
  if (name == "linear") return OutcomeForm::linear;
  if (name == "nonlinear") return OutcomeForm::nonlinear;
  return std::nullopt;
}

void DgpSpec::validate() const {
  if (dimension != 4) throw InvalidInput("dgp: the simulation design has exactly 4 covariates");
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
    throw InvalidInput("dgp: noise variance must be positive");
  }
  if (!std::isfinite(gamma)) throw InvalidInput("dgp: gamma must be finite");
  if (perturbed && n_for_perturbation == 0) throw InvalidInput("dgp: perturbed spec needs n >= 1");
}

namespace {

double perturbation_scale(const DgpSpec& spec) {
  return spec.perturbed ? 1.0 / std::sqrt(static_cast<double>(spec.n_for_perturbation)) : 0.0;
}

void check_width(const DgpSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& W) {
  if (static_cast<std::size_t>(W.cols()) != spec.dimension) {
    throw InvalidInput("dgp: covariate matrix must have " + std::to_string(spec.dimension) + " columns");
  }
}

}  // namespace

Eigen::VectorXd DgpSpec::propensity(const Eigen::Ref<const Eigen::MatrixXd>& W) const {
  check_width(*this, W);
  const Eigen::ArrayXd logit = gamma * (W.array() + (4.0 * W.array()).sin()).rowwise().sum();
  return (1.0 / (1.0 + (-logit).exp())).matrix();
}

Eigen::VectorXd DgpSpec::control_mean(const Eigen::Ref<const Eigen::MatrixXd>& W) const {
  check_width(*this, W);
  const auto w = W.array();
  Eigen::ArrayXd base;
  if (outcome_form == OutcomeForm::linear) {
    base = w.col(0) + w.col(1).abs() + w.col(2) + w.col(3).abs();
  } else {
    base = (4.0 * w.col(1)).cos() + (4.0 * w).sin().rowwise().sum();
  }
  if (perturbed) {
    const Eigen::ArrayXd pi = propensity(W).array();
    base -= perturbation_scale(*this) / (1.0 - pi);
  }
  return base.matrix();
}

Eigen::VectorXd DgpSpec::cate(const Eigen::Ref<const Eigen::MatrixXd>& W) const {
  check_width(*this, W);
  if (perturbed) {
    const Eigen::ArrayXd pi = propensity(W).array();
    return (1.0 + perturbation_scale(*this) / (pi * (1.0 - pi))).matrix();
  }
  const auto w = W.array();
  return (1.0 + w.col(0) + w.col(1).abs() + (4.0 * w.col(2)).cos() + w.col(3)).matrix();
}

Dataset sample_dgp(const DgpSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, std::sqrt(spec.noise_variance));

  const auto rows = static_cast<Eigen::Index>(n);
  const auto d = static_cast<Eigen::Index>(spec.dimension);
  Dataset data;
  data.W.resize(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data.W(i, j) = uniform(rng);
  }
  const Eigen::VectorXd pi = spec.propensity(data.W);
  const Eigen::VectorXd mu0 = spec.control_mean(data.W);
  const Eigen::VectorXd tau = spec.cate(data.W);
  data.A.resize(rows);
  data.Y.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    data.A[i] = unit(rng) < pi[i] ? 1.0 : 0.0;
    data.Y[i] = mu0[i] + data.A[i] * tau[i] + noise(rng);
  }
  return data;
}

DgpSpec apply_local_perturbation(const DgpSpec& spec, std::size_t n) {
  if (n == 0) throw InvalidInput("perturbation needs n >= 1");
  DgpSpec out = spec;
  out.perturbed = true;
  out.n_for_perturbation = n;
  return out;
}

double max_logit_term() {
  auto f = [](double w) { return w + std::sin(4.0 * w); };
  constexpr int grid = 20000;
  int best = 0;
  double best_value = f(-1.0);
  for (int k = 1; k <= grid; ++k) {
    const double v = f(-1.0 + 2.0 * k / grid);
    if (v > best_value) {
      best_value = v;
      best = k;
    }
  }
  double lo = -1.0 + 2.0 * std::max(best - 1, 0) / grid;
  double hi = -1.0 + 2.0 * std::min(best + 1, grid) / grid;
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  while (hi - lo > 1e-12) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = f(x1);
    }
  }
  return f(0.5 * (lo + hi));
}

double exact_ate(const DgpSpec& spec) {
  spec.validate();
  if (!spec.perturbed) return 1.5 + std::sin(4.0) / 4.0;
  constexpr int intervals = 1 << 16;
  const double h = 2.0 / intervals;
  const auto f = [&](double w) { return std::exp(spec.gamma * (w + std::sin(4.0 * w))); };
  double sum = f(-1.0) + f(1.0);
  for (int k = 1; k < intervals; ++k) sum += (k % 2 == 1 ? 4.0 : 2.0) * f(-1.0 + k * h);
  const double m = 0.5 * sum * h / 3.0;
  // w + sin(4w) is odd, so E exp(-gamma g) = E exp(gamma g) = m.
  const double inverse_overlap = 2.0 + 2.0 * std::pow(m, static_cast<double>(spec.dimension));
  return 1.0 + perturbation_scale(spec) * inverse_overlap;
}

double overlap_constant(const DgpSpec& spec) {
  spec.validate();
  const double sup = static_cast<double>(spec.dimension) * max_logit_term();
  // The logit ranges over (-|gamma| L, |gamma| L) by the odd symmetry of w + sin(4w).
  return 1.0 / (1.0 + std::exp(std::abs(spec.gamma) * sup));
}

}  // namespace adml::sim
