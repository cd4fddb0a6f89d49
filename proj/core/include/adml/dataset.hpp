#pragma once

#include <vector>

#include <Eigen/Dense>

namespace adml {

// n observations O = (W, A, Y) with W in R^d, A in {0,1}, Y real.
struct Dataset {
  Eigen::MatrixXd W;  // n x d
  Eigen::VectorXd A;  // n, entries 0 or 1
  Eigen::VectorXd Y;  // n

  Eigen::Index size() const { return W.rows(); }
  Eigen::Index dimension() const { return W.cols(); }

  // Throws InvalidInput when shapes disagree, an entry is not finite,
  // or A takes a value other than 0/1.
  void validate() const;

  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

}  // namespace adml
