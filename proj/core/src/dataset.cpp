#include "adml/dataset.hpp"

#include <string>

#include "adml/errors.hpp"

namespace adml {

void Dataset::validate() const {
  const auto n = W.rows();
  if (A.size() != n || Y.size() != n) {
    throw InvalidInput("dataset: W, A and Y must have the same number of rows");
  }
  if (!W.allFinite() || !Y.allFinite() || !A.allFinite()) {
    throw InvalidInput("dataset: non-finite value");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (A[i] != 0.0 && A[i] != 1.0) {
      throw InvalidInput("dataset: treatment must be 0 or 1 (row " + std::to_string(i) + ")");
    }
  }
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.W.resize(m, W.cols());
  out.A.resize(m);
  out.Y.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    out.W.row(r) = W.row(rows[static_cast<std::size_t>(r)]);
    out.A[r] = A[rows[static_cast<std::size_t>(r)]];
    out.Y[r] = Y[rows[static_cast<std::size_t>(r)]];
  }
  return out;
}

}  // namespace adml
