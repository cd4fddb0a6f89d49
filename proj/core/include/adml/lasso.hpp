#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace adml::lasso {

struct SolverOptions {
  // Stop when no standardized coefficient moves more than this in a sweep.
  double tolerance = 1e-9;
  int max_sweeps = 100000;
  bool fit_intercept = true;
  // Paths stop once the fraction of deviance explained gains less than
  // path_min_dev_change (relative) or exceeds path_max_dev_ratio, after at
  // least path_min_steps lambdas. Zero disables either rule.
  double path_min_dev_change = 1e-5;
  double path_max_dev_ratio = 0.999;
  std::size_t path_min_steps = 5;
};

// Penalized least-squares solution reported on the original column scale.
//
// The objective is glmnet's:
//   (1/2n) sum_i w_i (y_i - b0 - x_i' beta)^2 + lambda sum_j pw_j s_j |beta_j|
// where s_j is the weighted standard deviation of column j (the root mean
// square when no intercept is fitted). Equivalently, the plain weighted
// l1 penalty applied to coefficients of standardized columns.
struct LassoFit {
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  double lambda = 0.0;
  std::vector<Eigen::Index> support;
  double objective_value = 0.0;
  int sweeps = 0;

  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
    return (X * coefficients).array() + intercept;
  }
};

// Weighted cross-product moments of (X, y). Fold moments subtract from the
// full-sample moments, so a K-fold CV costs one pass over the data.
struct Moments {
  Eigen::MatrixXd xx;  // sum w x x'
  Eigen::VectorXd x;   // sum w x
  Eigen::VectorXd xy;  // sum w x y
  double w = 0.0;      // sum w
  double y = 0.0;      // sum w y
  double yy = 0.0;     // sum w y^2
  double rows = 0.0;   // n (unweighted row count)

  static Moments compute(const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const Eigen::Ref<const Eigen::VectorXd>& y,
                         const Eigen::VectorXd* weights = nullptr);

  Moments& operator+=(const Moments& other);
  Moments& operator-=(const Moments& other);
};

// Penalized least squares in standardized Gram form:
//   minimize 0.5 (yy - 2 c'b + b'Hb) + lambda sum_j pw_j |b_j|
class GramProblem {
 public:
  GramProblem() = default;
  GramProblem(const Moments& moments, bool fit_intercept);

  Eigen::Index features() const { return gram_.rows(); }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::VectorXd& xty() const { return xty_; }
  const Eigen::VectorXd& scale() const { return scale_; }
  const Eigen::VectorXd& mean_x() const { return mean_x_; }
  double mean_y() const { return mean_y_; }
  double yy() const { return yy_; }
  bool fit_intercept() const { return fit_intercept_; }
  // False for columns with (numerically) zero spread; they stay at zero.
  bool usable(Eigen::Index j) const { return usable_[static_cast<std::size_t>(j)] != 0; }
  // Lowest-index column identical to column j after standardization, or -1.
  Eigen::Index twin(Eigen::Index j) const { return twin_[static_cast<std::size_t>(j)]; }
  bool has_twins() const { return has_twins_; }

  double objective(const Eigen::VectorXd& beta, double lambda, const Eigen::VectorXd& pw) const;
  double duality_gap(const Eigen::VectorXd& beta, double lambda, const Eigen::VectorXd& pw) const;
  // 1 - RSS(beta) / RSS(0), RSS(0) around the mean when an intercept is fitted.
  double deviance_ratio(const Eigen::VectorXd& beta) const;

  // Smallest lambda at which every penalized coefficient is zero. Unpenalized
  // columns (pw == 0) are fitted first.
  double lambda_max(const Eigen::VectorXd& pw) const;

  LassoFit to_original_scale(const Eigen::VectorXd& beta, double lambda,
                             const Eigen::VectorXd& pw) const;

 private:
  double quadratic(const Eigen::VectorXd& beta) const;  // b'Hb over the support of b

  Eigen::MatrixXd gram_;
  Eigen::VectorXd xty_;
  Eigen::VectorXd scale_;
  Eigen::VectorXd mean_x_;
  double mean_y_ = 0.0;
  double yy_ = 0.0;
  bool fit_intercept_ = true;
  std::vector<char> usable_;
  std::vector<Eigen::Index> twin_;
  bool has_twins_ = false;
};

// Cyclic coordinate descent with active-set cycling, warm-started from
// `beta` (standardized scale, updated in place). Returns the sweep count.
// Appends the objective after every sweep to `trace` when given.
int solve_standardized(const GramProblem& problem, double lambda, const Eigen::VectorXd& pw,
                       Eigen::VectorXd& beta, const SolverOptions& options,
                       std::vector<double>* trace = nullptr);

struct PathFit {
  std::vector<double> lambdas;        // the solved prefix of the requested grid
  std::vector<Eigen::VectorXd> betas; // standardized solutions, warm-started in order
  int sweeps = 0;
};

PathFit solve_path(const GramProblem& problem, const std::vector<double>& lambdas,
                   const Eigen::VectorXd& pw, const SolverOptions& options);

LassoFit coordinate_descent(const Eigen::Ref<const Eigen::MatrixXd>& X,
                            const Eigen::Ref<const Eigen::VectorXd>& y, double lambda,
                            const Eigen::VectorXd& penalty_weights,
                            const Eigen::VectorXd* obs_weights = nullptr,
                            const SolverOptions& options = {});

// Largest KKT violation of `fit`, recomputed from the raw data and divided by
// max(1, ||(1/n) X_c' W (y - ybar)||_inf). Includes the intercept equation.
double kkt_violation(const Eigen::Ref<const Eigen::MatrixXd>& X,
                     const Eigen::Ref<const Eigen::VectorXd>& y, const LassoFit& fit,
                     const Eigen::VectorXd& penalty_weights,
                     const Eigen::VectorXd* obs_weights = nullptr, bool fit_intercept = true);

// `count` log-spaced values from lambda_max down to ratio * lambda_max.
std::vector<double> log_grid(double lambda_max, std::size_t count = 100, double ratio = 1e-4);

struct CvPlan {
  std::vector<int> fold_of;     // observation -> fold in [0, folds)
  int folds = 0;
  std::vector<double> lambdas;  // strictly decreasing; empty means default grid
};

// Folds are assigned by ranking a seeded hash of each row's contents, so the
// assignment of an observation does not depend on where it sits in the file.
CvPlan make_cv_plan(const Eigen::Ref<const Eigen::MatrixXd>& row_contents, int folds,
                    std::uint64_t seed);

struct CvResult {
  double best_lambda = 0.0;
  std::size_t best_index = 0;
  std::vector<double> lambdas;
  std::vector<double> cv_error;  // pooled mean out-of-fold squared error
  LassoFit best_fit;             // full-sample fit at best_lambda
};

// Holds per-fold Gram problems so several penalty profiles can be compared
// on the same folds without touching the data again.
class CrossValidator {
 public:
  CrossValidator(const Eigen::Ref<const Eigen::MatrixXd>& X,
                 const Eigen::Ref<const Eigen::VectorXd>& y, const CvPlan& plan,
                 const SolverOptions& options = {});

  // An empty grid selects log_grid(lambda_max(full data)). The full-sample
  // path runs first and fixes the grid; a fold path that stops earlier keeps
  // its last solution for the remaining lambdas.
  CvResult run(const Eigen::VectorXd& penalty_weights, std::vector<double> lambdas = {}) const;

  const GramProblem& full_problem() const { return full_; }

 private:
  struct Fold {
    GramProblem train;
    Eigen::MatrixXd test_x;
    Eigen::VectorXd test_y;
  };
  SolverOptions options_;
  GramProblem full_;
  std::vector<Fold> folds_;
  double total_test_rows_ = 0.0;
};

CvResult cross_validate(const Eigen::Ref<const Eigen::MatrixXd>& X,
                        const Eigen::Ref<const Eigen::VectorXd>& y, std::vector<double> grid,
                        int folds, std::uint64_t seed, const Eigen::VectorXd& penalty_weights,
                        const SolverOptions& options = {});

struct LinearFit {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  bool rank_deficient = false;
};

// Weighted least squares; rank deficiency resolves to the minimum-norm
// coefficient vector. Zero weights drop rows.
LinearFit solve_wls(const Eigen::Ref<const Eigen::MatrixXd>& X,
                    const Eigen::Ref<const Eigen::VectorXd>& y,
                    const Eigen::VectorXd* obs_weights = nullptr, bool fit_intercept = true);

// Unpenalized refit on `support`; other coefficients are exactly zero.
// An empty support gives the intercept-only fit.
LassoFit relaxed_refit(const Eigen::Ref<const Eigen::MatrixXd>& X,
                       const Eigen::Ref<const Eigen::VectorXd>& y,
                       const std::vector<Eigen::Index>& support,
                       const Eigen::VectorXd* obs_weights = nullptr, bool fit_intercept = true);

// Minimum-norm solution of the symmetric PSD system G c = b.
Eigen::VectorXd solve_gram(const Eigen::Ref<const Eigen::MatrixXd>& G,
                           const Eigen::Ref<const Eigen::VectorXd>& b,
                           bool* rank_deficient = nullptr);

}  // namespace adml::lasso
