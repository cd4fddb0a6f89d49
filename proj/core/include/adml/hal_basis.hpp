#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace adml::basis {

// First-order hinge x -> (x - u) 1{x >= u}.
inline double hinge(double x, double u) noexcept { return x >= u ? x - u : 0.0; }

enum class Block {
  covariate_only,
  // Every column is repeated once more, multiplied by the treatment a.
  treatment_interacted,
};

// Additive hinge dictionary. Column order is
//   [intercept] [linear_0, hinges_0...] [linear_1, hinges_1...] ...
// and, for treatment_interacted, the same list again multiplied by a.
struct BasisSpec {
  std::size_t dimension = 0;
  std::vector<std::vector<double>> knots;  // strictly ascending per covariate
  bool include_intercept = false;
  bool include_linear_terms = false;
  Block block = Block::covariate_only;
  std::vector<std::string> warnings;

  // Columns in one block (intercept + linear terms + knots).
  std::size_t block_columns() const;
  std::size_t column_count() const;
  std::size_t hinge_count() const;

  // Throws InvalidInput when the knot lists are malformed.
  void validate() const;
};

struct ColumnLabel {
  enum class Kind { intercept, linear, hinge };
  Kind kind = Kind::hinge;
  std::optional<std::size_t> covariate;  // empty for the intercept
  double knot = 0.0;
  bool treated = false;  // column lives in the a-multiplied block

  bool operator==(const ColumnLabel&) const = default;
};

struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<ColumnLabel> column_labels;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

// Type-1 empirical quantile (inverse ECDF): smallest order statistic x(k)
// with k/n >= p.
double empirical_quantile(std::vector<double> sorted_values, double p);

// Knots at the k/(K+1) empirical quantiles (k = 1..K) of every covariate.
// Duplicate knots collapse; a constant covariate contributes no columns and
// leaves a warning on the spec.
BasisSpec build_additive_basis(const Eigen::Ref<const Eigen::MatrixXd>& covariates,
                               std::size_t knots_per_covariate, Block block,
                               bool include_intercept = false,
                               bool include_linear_terms = false);

// Treatment values are required for treatment_interacted specs only.
DesignMatrix expand(const BasisSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& covariates,
                    const Eigen::VectorXd* treatment = nullptr);

// expand() with every treatment value set to `a`.
DesignMatrix expand_at(const BasisSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& covariates,
                       double a);

std::vector<ColumnLabel> column_labels(const BasisSpec& spec);

}  // namespace adml::basis
