#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

#include "adml/dataset.hpp"

namespace adml::sim {

enum class OutcomeForm { linear, nonlinear };

std::string_view to_string(OutcomeForm form);
std::optional<OutcomeForm> parse_outcome_form(std::string_view name);

// Simulation design with W ~ U(-1, 1)^4,
//   logit pi(w) = gamma sum_j {w_j + sin(4 w_j)},
//   Y | A, W ~ N(mu(0, W) + A tau(W), noise_variance),
//   tau(w) = 1 + w1 + |w2| + cos(4 w3) + w4,
//   mu(0, w) = w1 + |w2| + w3 + |w4|             (linear)
//            = cos(4 w2) + sum_j sin(4 w_j)      (nonlinear).
// A perturbed spec replaces tau by 1 + n^{-1/2} / {pi (1 - pi)} and shifts
// mu(0, .) by -n^{-1/2} / (1 - pi), n = n_for_perturbation.
struct DgpSpec {
  double gamma = 0.5;
  OutcomeForm outcome_form = OutcomeForm::linear;
  bool perturbed = false;
  std::size_t n_for_perturbation = 0;
  double noise_variance = 0.5;
  std::size_t dimension = 4;

  void validate() const;

  Eigen::VectorXd propensity(const Eigen::Ref<const Eigen::MatrixXd>& W) const;
  Eigen::VectorXd control_mean(const Eigen::Ref<const Eigen::MatrixXd>& W) const;
  Eigen::VectorXd cate(const Eigen::Ref<const Eigen::MatrixXd>& W) const;

  bool operator==(const DgpSpec&) const = default;
};

Dataset sample_dgp(const DgpSpec& spec, std::size_t n, std::uint64_t seed);

// Least-favorable local perturbation at sample size n (baseline CATE 1).
DgpSpec apply_local_perturbation(const DgpSpec& spec, std::size_t n);

// E tau(W) without Monte Carlo error: 3/2 + sin(4)/4, or for a perturbed spec
// 1 + n^{-1/2} E[1/{pi (1 - pi)}] = 1 + n^{-1/2} (2 + 2 M^4) with
// M = E exp{gamma (w + sin 4w)} by composite Simpson quadrature.
double exact_ate(const DgpSpec& spec);

// inf_w min{pi(w), 1 - pi(w)} over (-1, 1)^4.
double overlap_constant(const DgpSpec& spec);

// max over w in [-1, 1] of w + sin(4 w), by grid bracketing and golden-section refinement.
double max_logit_term();

}  // namespace adml::sim
