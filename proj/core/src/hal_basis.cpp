#include "adml/hal_basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adml/errors.hpp"

namespace adml::basis {

std::size_t BasisSpec::block_columns() const {
  std::size_t count = include_intercept ? 1 : 0;
  for (const auto& k : knots) count += k.size();
  if (include_linear_terms) count += dimension;
  return count;
}

std::size_t BasisSpec::column_count() const {
  const auto per_block = block_columns();
  return block == Block::treatment_interacted ? 2 * per_block : per_block;
}

std::size_t BasisSpec::hinge_count() const {
  std::size_t count = 0;
  for (const auto& k : knots) count += k.size();
  return block == Block::treatment_interacted ? 2 * count : count;
}

void BasisSpec::validate() const {
  if (knots.size() != dimension) {
    throw InvalidInput("basis: one knot list per covariate required");
  }
  for (std::size_t j = 0; j < knots.size(); ++j) {
    for (std::size_t k = 0; k < knots[j].size(); ++k) {
      if (!std::isfinite(knots[j][k])) {
        throw InvalidInput("basis: non-finite knot for covariate " + std::to_string(j));
      }
      if (k > 0 && !(knots[j][k] > knots[j][k - 1])) {
        throw InvalidInput("basis: knots must be strictly ascending for covariate " +
                           std::to_string(j));
      }
    }
  }
}

double empirical_quantile(std::vector<double> sorted_values, double p) {
  if (sorted_values.empty()) throw InvalidInput("quantile of empty sample");
  const auto n = sorted_values.size();
  // Smallest k (1-based) with k/n >= p, guarding against p*n landing a hair
  // above an integer through rounding.
  auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n);
  return sorted_values[k - 1];
}

BasisSpec build_additive_basis(const Eigen::Ref<const Eigen::MatrixXd>& covariates,
                               std::size_t knots_per_covariate, Block block,
                               bool include_intercept, bool include_linear_terms) {
  const auto d = static_cast<std::size_t>(covariates.cols());
  BasisSpec spec;
  spec.dimension = d;
  spec.block = block;
  spec.include_intercept = include_intercept;
  spec.include_linear_terms = include_linear_terms;
  spec.knots.resize(d);
  if (knots_per_covariate == 0) return spec;
  if (covariates.rows() == 0) throw InvalidInput("basis: empty sample");
  if (!covariates.allFinite()) throw InvalidInput("basis: non-finite covariate");

  const double denom = static_cast<double>(knots_per_covariate + 1);
  std::vector<double> column(static_cast<std::size_t>(covariates.rows()));
  for (std::size_t j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
      column[static_cast<std::size_t>(i)] = covariates(i, static_cast<Eigen::Index>(j));
    }
    std::sort(column.begin(), column.end());
    if (column.front() == column.back()) {
      spec.warnings.push_back("covariate " + std::to_string(j) +
                              " is constant; it contributes no hinge columns");
      continue;
    }
    auto& knots = spec.knots[j];
    knots.reserve(knots_per_covariate);
    for (std::size_t k = 1; k <= knots_per_covariate; ++k) {
      const double q = empirical_quantile(column, static_cast<double>(k) / denom);
      if (knots.empty() || q > knots.back()) knots.push_back(q);
    }
  }
  return spec;
}

std::vector<ColumnLabel> column_labels(const BasisSpec& spec) {
  std::vector<ColumnLabel> labels;
  labels.reserve(spec.column_count());
  auto emit_block = [&](bool treated) {
    if (spec.include_intercept) {
      labels.push_back({ColumnLabel::Kind::intercept, std::nullopt, 0.0, treated});
    }
    for (std::size_t j = 0; j < spec.dimension; ++j) {
      if (spec.include_linear_terms) {
        labels.push_back({ColumnLabel::Kind::linear, j, 0.0, treated});
      }
      for (double u : spec.knots[j]) {
        labels.push_back({ColumnLabel::Kind::hinge, j, u, treated});
      }
    }
  };
  emit_block(false);
  if (spec.block == Block::treatment_interacted) emit_block(true);
  return labels;
}

namespace {

DesignMatrix expand_impl(const BasisSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& w,
                         const Eigen::VectorXd* treatment, double constant_a) {
  spec.validate();
  if (static_cast<std::size_t>(w.cols()) != spec.dimension) {
    throw InvalidInput("expand: data has " + std::to_string(w.cols()) +
                       " covariates, basis expects " + std::to_string(spec.dimension));
  }
  if (treatment && treatment->size() != w.rows()) {
    throw InvalidInput("expand: treatment length does not match covariate rows");
  }
  if (!w.allFinite()) throw InvalidInput("expand: non-finite covariate");

  DesignMatrix out;
  out.column_labels = column_labels(spec);
  const auto n = w.rows();
  const auto per_block = static_cast<Eigen::Index>(spec.block_columns());
  out.values.resize(n, static_cast<Eigen::Index>(spec.column_count()));

  Eigen::Index col = 0;
  if (spec.include_intercept) out.values.col(col++).setOnes();
  for (std::size_t j = 0; j < spec.dimension; ++j) {
    const auto wj = w.col(static_cast<Eigen::Index>(j));
    if (spec.include_linear_terms) out.values.col(col++) = wj;
    for (double u : spec.knots[j]) {
      auto dst = out.values.col(col++);
      for (Eigen::Index i = 0; i < n; ++i) dst[i] = hinge(wj[i], u);
    }
  }
  if (spec.block == Block::treatment_interacted) {
    if (treatment) {
      out.values.rightCols(per_block) =
          out.values.leftCols(per_block).array().colwise() * treatment->array();
    } else {
      out.values.rightCols(per_block) = constant_a * out.values.leftCols(per_block);
    }
  }
  return out;
}

}  // namespace

DesignMatrix expand(const BasisSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& covariates,
                    const Eigen::VectorXd* treatment) {
  if (spec.block == Block::treatment_interacted && treatment == nullptr) {
    throw InvalidInput("expand: treatment_interacted basis needs treatment values");
  }
  return expand_impl(spec, covariates, treatment, 0.0);
}

DesignMatrix expand_at(const BasisSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& covariates,
                       double a) {
  return expand_impl(spec, covariates, nullptr, a);
}

}  // namespace adml::basis
