#include <doctest.h>

#include <random>

#include "adml/errors.hpp"
#include "adml/hal_basis.hpp"
#include "helpers.hpp"

using namespace adml;
using namespace adml::basis;

TEST_CASE("hinge evaluates above, below and at the knot") {
  CHECK(hinge(0.5, 0.0) == 0.5);
  CHECK(hinge(-0.3, 0.2) == 0.0);
  CHECK(hinge(0.7, 0.7) == 0.0);
}

TEST_CASE("four covariates with twenty knots give eighty hinge columns") {
  std::mt19937_64 rng(1);
  Eigen::MatrixXd W(500, 4);
  for (int j = 0; j < 4; ++j) W.col(j) = testing::uniform(500, -1, 1, rng);
  const auto spec = build_additive_basis(W, 20, Block::covariate_only);
  CHECK(spec.hinge_count() == 80);
  CHECK(spec.column_count() == 80);
  CHECK(expand(spec, W).cols() == 80);
}

TEST_CASE("one knot at zero gives a single hinge column") {
  BasisSpec spec;
  spec.dimension = 1;
  spec.knots = {{0.0}};
  Eigen::MatrixXd w(3, 1);
  w << 0.7, -0.2, 0.0;
  const auto X = expand(spec, w);
  REQUIRE(X.cols() == 1);
  CHECK(X.values(0, 0) == 0.7);
  CHECK(X.values(1, 0) == 0.0);
  CHECK(X.values(2, 0) == 0.0);
}

TEST_CASE("type-1 quantiles of 1..5 with two knots are 2 and 4") {
  Eigen::MatrixXd w(5, 1);
  w << 3, 1, 5, 2, 4;
  const auto spec = build_additive_basis(w, 2, Block::covariate_only);
  REQUIRE(spec.knots[0].size() == 2);
  CHECK(spec.knots[0][0] == 2.0);
  CHECK(spec.knots[0][1] == 4.0);
  CHECK(empirical_quantile({1, 2, 3, 4, 5}, 0.2) == 1.0);
  CHECK(empirical_quantile({1, 2, 3, 4, 5}, 1.0) == 5.0);
}

TEST_CASE("intercept-only spec expands to a column of ones") {
  BasisSpec spec;
  spec.dimension = 2;
  spec.knots = {{}, {}};
  spec.include_intercept = true;
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd W = testing::gaussian(7, 2, rng);
  const auto X = expand(spec, W);
  REQUIRE(X.cols() == 1);
  CHECK(X.values.isOnes());
  CHECK(X.column_labels[0].kind == ColumnLabel::Kind::intercept);
}

TEST_CASE("treatment-interacted block is zero when every a is zero") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd W = testing::gaussian(40, 3, rng);
  const auto spec = build_additive_basis(W, 5, Block::treatment_interacted, true, true);
  const Eigen::VectorXd a = Eigen::VectorXd::Zero(40);
  const auto X = expand(spec, W, &a);
  const auto half = static_cast<Eigen::Index>(spec.block_columns());
  CHECK(X.cols() == 2 * half);
  CHECK(X.values.rightCols(half).isZero(0.0));
  CHECK(X.values.leftCols(half).cwiseAbs().sum() > 0.0);

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(40);
  const auto X1 = expand(spec, W, &ones);
  CHECK(X1.values.rightCols(half) == X1.values.leftCols(half));
  CHECK(expand_at(spec, W, 1.0).values == X1.values);
  CHECK(expand_at(spec, W, 0.0).values == X.values);
}

TEST_CASE("expand rejects mismatched dimensions and missing treatment") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd W = testing::gaussian(10, 3, rng);
  const auto spec = build_additive_basis(W, 2, Block::covariate_only);
  const Eigen::MatrixXd wrong = testing::gaussian(10, 2, rng);
  CHECK_THROWS_AS(expand(spec, wrong), InvalidInput);
  const auto interacted = build_additive_basis(W, 2, Block::treatment_interacted);
  CHECK_THROWS_AS(expand(interacted, W), InvalidInput);
  BasisSpec bad;
  bad.dimension = 1;
  bad.knots = {{0.5, 0.5}};
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("a constant covariate contributes no columns and leaves a warning") {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd W = testing::gaussian(30, 2, rng);
  W.col(1).setConstant(3.0);
  const auto spec = build_additive_basis(W, 4, Block::covariate_only);
  CHECK(spec.knots[1].empty());
  CHECK(spec.knots[0].size() == 4);
  CHECK(spec.warnings.size() == 1);
  CHECK(expand(spec, W).cols() == 4);
}

TEST_CASE("duplicate quantiles collapse") {
  Eigen::MatrixXd w(6, 1);
  w << 0, 0, 0, 0, 0, 1;
  const auto spec = build_additive_basis(w, 3, Block::covariate_only);
  CHECK(spec.knots[0] == std::vector<double>{0.0});
}

TEST_CASE("column count formula holds over random specs") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> dim(1, 5);
  std::uniform_int_distribution<int> knots(0, 12);
  std::bernoulli_distribution flag(0.5);
  for (int rep = 0; rep < 200; ++rep) {
    const int d = dim(rng);
    const Eigen::MatrixXd W = testing::gaussian(25, d, rng);
    const bool intercept = flag(rng);
    const bool linear = flag(rng);
    const auto block = flag(rng) ? Block::treatment_interacted : Block::covariate_only;
    const auto spec = build_additive_basis(W, static_cast<std::size_t>(knots(rng)), block, intercept, linear);
    std::size_t expected = intercept ? 1 : 0;
    for (const auto& k : spec.knots) expected += k.size();
    if (linear) expected += static_cast<std::size_t>(d);
    if (block == Block::treatment_interacted) expected *= 2;
    CHECK(spec.column_count() == expected);
    CHECK(column_labels(spec).size() == expected);
    const Eigen::VectorXd a = testing::bernoulli(25, 0.5, rng);
    CHECK(static_cast<std::size_t>(expand(spec, W, &a).cols()) == expected);
  }
}

TEST_CASE("expand is deterministic and hinge columns are monotone") {
  std::mt19937_64 rng(7);
  Eigen::MatrixXd W = testing::gaussian(200, 2, rng);
  const auto spec = build_additive_basis(W, 8, Block::covariate_only);
  CHECK(expand(spec, W).values == expand(spec, W).values);

  Eigen::VectorXd sorted = W.col(0);
  std::sort(sorted.begin(), sorted.end());
  Eigen::MatrixXd Ws(200, 2);
  Ws.col(0) = sorted;
  Ws.col(1).setZero();
  const auto X = expand(spec, Ws).values;
  for (std::size_t k = 0; k < spec.knots[0].size(); ++k) {
    for (Eigen::Index i = 1; i < 200; ++i) CHECK(X(i, k) >= X(i - 1, k));
  }
  CHECK((X.array() >= 0.0).all());
}
