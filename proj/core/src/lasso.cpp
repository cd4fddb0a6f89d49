#include "adml/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "adml/errors.hpp"
#include "adml/seeding.hpp"

namespace adml::lasso {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

Eigen::VectorXd unit_or(const Eigen::VectorXd* weights, Eigen::Index n) {
  if (weights == nullptr) return Eigen::VectorXd::Ones(n);
  if (weights->size() != n) throw InvalidInput("observation weights: length mismatch");
  if (!weights->allFinite() || (weights->array() < 0.0).any()) {
    throw InvalidInput("observation weights must be finite and nonnegative");
  }
  return *weights;
}

void check_xy(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (X.rows() != y.size()) throw InvalidInput("design rows do not match response length");
  if (!X.allFinite() || !y.allFinite()) throw InvalidInput("non-finite design or response");
}

}  // namespace

Moments Moments::compute(const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::VectorXd* weights) {
  check_xy(X, y);
  const Eigen::VectorXd w = unit_or(weights, X.rows());
  Moments m;
  const auto p = X.cols();
  m.xx = Eigen::MatrixXd::Zero(p, p);
  if (weights == nullptr) {
    m.xx.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
  } else {
    const Eigen::MatrixXd scaled = w.array().sqrt().matrix().asDiagonal() * X;
    m.xx.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
  }
  m.xx = m.xx.selfadjointView<Eigen::Lower>();
  const Eigen::VectorXd wy = w.cwiseProduct(y);
  m.x = X.transpose() * w;
  m.xy = X.transpose() * wy;
  m.w = w.sum();
  m.y = wy.sum();
  m.yy = wy.dot(y);
  m.rows = static_cast<double>(X.rows());
  return m;
}

Moments& Moments::operator+=(const Moments& other) {
  xx += other.xx;
  x += other.x;
  xy += other.xy;
  w += other.w;
  y += other.y;
  yy += other.yy;
  rows += other.rows;
  return *this;
}

Moments& Moments::operator-=(const Moments& other) {
  xx -= other.xx;
  x -= other.x;
  xy -= other.xy;
  w -= other.w;
  y -= other.y;
  yy -= other.yy;
  rows -= other.rows;
  return *this;
}

GramProblem::GramProblem(const Moments& m, bool fit_intercept) : fit_intercept_(fit_intercept) {
  if (!(m.w > 0.0) || !(m.rows > 0.0)) throw InvalidInput("lasso: no observations with positive weight");
  const auto p = m.xx.rows();
  const double n = m.rows;
  Eigen::MatrixXd cross = m.xx;
  Eigen::VectorXd cross_y = m.xy;
  double yy = m.yy;
  if (fit_intercept) {
    mean_x_ = m.x / m.w;
    mean_y_ = m.y / m.w;
    cross.noalias() -= m.w * mean_x_ * mean_x_.transpose();
    cross_y -= m.w * mean_y_ * mean_x_;
    yy -= m.w * mean_y_ * mean_y_;
  } else {
    mean_x_ = Eigen::VectorXd::Zero(p);
    mean_y_ = 0.0;
  }
  yy_ = std::max(yy, 0.0) / n;

  scale_.resize(p);
  usable_.assign(static_cast<std::size_t>(p), 0);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double var = cross(j, j) / m.w;
    const double raw = m.xx(j, j) / m.w;
    const bool ok = var > 0.0 && var > 1e-12 * raw;
    usable_[static_cast<std::size_t>(j)] = ok ? 1 : 0;
    scale_[j] = ok ? std::sqrt(var) : 0.0;
  }
  gram_ = Eigen::MatrixXd::Zero(p, p);
  xty_ = Eigen::VectorXd::Zero(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    if (!usable(k)) {
      gram_(k, k) = 1.0;
      continue;
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      if (usable(j)) gram_(j, k) = cross(j, k) / (n * scale_[j] * scale_[k]);
    }
    xty_[k] = cross_y[k] / (n * scale_[k]);
  }
  twin_.assign(static_cast<std::size_t>(p), -1);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!usable(j)) continue;
    for (Eigen::Index k = 0; k < j; ++k) {
      if (!usable(k) || twin_[static_cast<std::size_t>(k)] >= 0) continue;
      if (gram_(j, k) >= (1.0 - 1e-12) * std::sqrt(gram_(j, j) * gram_(k, k))) {
        twin_[static_cast<std::size_t>(j)] = k;
        has_twins_ = true;
        break;
      }
    }
  }
}

double GramProblem::quadratic(const Eigen::VectorXd& beta) const {
  std::vector<Eigen::Index> nz;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta[j] != 0.0) nz.push_back(j);
  }
  double total = 0.0;
  for (auto a : nz) {
    double row = 0.0;
    for (auto b : nz) row += gram_(b, a) * beta[b];
    total += beta[a] * row;
  }
  return total;
}

double GramProblem::objective(const Eigen::VectorXd& beta, double lambda,
                              const Eigen::VectorXd& pw) const {
  const double quad = quadratic(beta);
  const double penalty = (pw.array() * beta.array().abs()).sum();
  return 0.5 * (yy_ - 2.0 * xty_.dot(beta) + quad) + lambda * penalty;
}

double GramProblem::duality_gap(const Eigen::VectorXd& beta, double lambda,
                                const Eigen::VectorXd& pw) const {
  const Eigen::VectorXd grad = xty_ - gram_ * beta;
  double s = 1.0;
  for (Eigen::Index j = 0; j < grad.size(); ++j) {
    if (!usable(j) || pw[j] <= 0.0) continue;
    const double a = std::abs(grad[j]);
    if (a > lambda * pw[j]) s = std::min(s, lambda * pw[j] / a);
  }
  const double cb = xty_.dot(beta);
  const double ry = yy_ - cb;
  const double rr = yy_ - 2.0 * cb + beta.dot(gram_ * beta);
  const double dual = s * ry - 0.5 * s * s * rr;
  return objective(beta, lambda, pw) - dual;
}

double GramProblem::deviance_ratio(const Eigen::VectorXd& beta) const {
  if (!(yy_ > 0.0)) return 0.0;
  const double rss = yy_ - 2.0 * xty_.dot(beta) + quadratic(beta);
  return 1.0 - rss / yy_;
}

double GramProblem::lambda_max(const Eigen::VectorXd& pw) const {
  const auto p = features();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  bool any_free = false;
  for (Eigen::Index j = 0; j < p; ++j) any_free = any_free || (usable(j) && pw[j] == 0.0);
  if (any_free) {
    SolverOptions opts;
    solve_standardized(*this, std::numeric_limits<double>::max(), pw, beta, opts);
  }
  const Eigen::VectorXd grad = xty_ - gram_ * beta;
  double best = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (usable(j) && pw[j] > 0.0) best = std::max(best, std::abs(grad[j]) / pw[j]);
  }
  return best;
}

LassoFit GramProblem::to_original_scale(const Eigen::VectorXd& beta, double lambda,
                                        const Eigen::VectorXd& pw) const {
  LassoFit fit;
  const auto p = features();
  fit.coefficients = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (beta[j] != 0.0) {
      fit.coefficients[j] = beta[j] / scale_[j];
      fit.support.push_back(j);
    }
  }
  fit.intercept = fit_intercept_ ? mean_y_ - mean_x_.dot(fit.coefficients) : 0.0;
  fit.lambda = lambda;
  fit.objective_value = objective(beta, lambda, pw);
  return fit;
}

int solve_standardized(const GramProblem& problem, double lambda, const Eigen::VectorXd& pw,
                       Eigen::VectorXd& beta, const SolverOptions& options,
                       std::vector<double>* trace) {
  const auto p = problem.features();
  if (pw.size() != p) throw InvalidInput("penalty weights: length mismatch");
  if (beta.size() != p) beta = Eigen::VectorXd::Zero(p);
  if (!(lambda >= 0.0)) throw InvalidInput("lambda must be nonnegative");
  const auto& H = problem.gram();

  // Identical columns: only the cheapest of each group is fitted.
  std::vector<char> idle(static_cast<std::size_t>(p), 0);
  if (problem.has_twins()) {
    std::vector<Eigen::Index> keep(static_cast<std::size_t>(p), -1);
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto t = problem.twin(j);
      if (t < 0) continue;
      auto& kept = keep[static_cast<std::size_t>(t)];
      if (kept < 0) kept = t;
      if (pw[j] < pw[kept]) kept = j;
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto t = problem.twin(j);
      const auto kept = keep[static_cast<std::size_t>(t < 0 ? j : t)];
      if (kept < 0 || kept == j) continue;
      idle[static_cast<std::size_t>(j)] = 1;
      beta[kept] += beta[j];
      beta[j] = 0.0;
    }
  }
  auto fitted = [&](Eigen::Index j) {
    return problem.usable(j) && idle[static_cast<std::size_t>(j)] == 0;
  };

  Eigen::VectorXd grad = problem.xty();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (beta[j] != 0.0) grad.noalias() -= H.col(j) * beta[j];
  }

  auto update = [&](Eigen::Index j) -> double {
    if (!fitted(j)) return 0.0;
    const double hjj = H(j, j);
    const double old = beta[j];
    const double threshold = pw[j] == 0.0 ? 0.0 : lambda * pw[j];
    const double fresh = soft_threshold(grad[j] + hjj * old, threshold) / hjj;
    if (fresh == old) return 0.0;
    const double delta = fresh - old;
    grad.noalias() -= H.col(j) * delta;
    beta[j] = fresh;
    return std::abs(delta) * std::sqrt(hjj);
  };

  // Active-set refinement: solve the stationarity system on a signed support,
  // line-search to the best zero crossing, then grow the support with the worst
  // KKT violator. Every accepted step lowers the objective. Returns true once
  // the support, signs and inactive KKT conditions are all consistent.
  const double kkt_slack = 1e-12 * std::max(1.0, problem.xty().cwiseAbs().maxCoeff());
  constexpr int kRefineSteps = 64;
  auto polish = [&]() -> bool {
    std::vector<Eigen::Index> act;
    Eigen::VectorXd sgn = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!fitted(j) || (beta[j] == 0.0 && pw[j] != 0.0)) continue;
      act.push_back(j);
      sgn[j] = pw[j] == 0.0 ? 0.0 : (beta[j] > 0.0 ? 1.0 : -1.0);
    }
    double current = problem.objective(beta, lambda, pw);
    for (int step = 0; step < kRefineSteps; ++step) {
      bool consistent = true;
      if (!act.empty()) {
        const auto k = static_cast<Eigen::Index>(act.size());
        Eigen::VectorXd rhs(k);
        for (Eigen::Index i = 0; i < k; ++i) {
          const auto j = act[static_cast<std::size_t>(i)];
          rhs[i] = problem.xty()[j] - lambda * pw[j] * sgn[j];
        }
        const Eigen::MatrixXd block = H(act, act);
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(block);
        const bool definite = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                              ldlt.vectorD().minCoeff() > 1e-12 * block.diagonal().maxCoeff();
        const Eigen::VectorXd sol = definite ? Eigen::VectorXd(ldlt.solve(rhs)) : solve_gram(block, rhs);
        if (!sol.allFinite()) return false;
        const Eigen::VectorXd from = beta(act);

        std::vector<double> ts{1.0};
        for (Eigen::Index i = 0; i < k; ++i) {
          const auto j = act[static_cast<std::size_t>(i)];
          if (pw[j] != 0.0 && sol[i] * sgn[j] <= 0.0) {
            consistent = false;
            if (from[i] != 0.0) ts.push_back(from[i] / (from[i] - sol[i]));
          }
        }
        Eigen::VectorXd best = beta;
        double best_value = current;
        for (double t : ts) {
          Eigen::VectorXd trial = beta;
          for (Eigen::Index i = 0; i < k; ++i) {
            const auto j = act[static_cast<std::size_t>(i)];
            const bool crosses = t < 1.0 && from[i] != 0.0 && from[i] / (from[i] - sol[i]) == t;
            trial[j] = crosses ? 0.0 : from[i] + t * (sol[i] - from[i]);
          }
          const double value = problem.objective(trial, lambda, pw);
          if (value < best_value) {
            best_value = value;
            best = trial;
          }
        }
        if (!(best_value < current)) return false;
        beta = best;
        current = best_value;
        grad = problem.xty() - H * beta;
        std::vector<Eigen::Index> kept;
        for (auto j : act) {
          if (pw[j] == 0.0) {
            kept.push_back(j);
          } else if (beta[j] != 0.0) {
            if ((beta[j] > 0.0 ? 1.0 : -1.0) != sgn[j]) consistent = false;
            sgn[j] = beta[j] > 0.0 ? 1.0 : -1.0;
            kept.push_back(j);
          } else {
            sgn[j] = 0.0;
            consistent = false;
          }
        }
        act = std::move(kept);
      }
      Eigen::Index worst = -1;
      double worst_excess = kkt_slack;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (!fitted(j) || pw[j] == 0.0 || beta[j] != 0.0) continue;
        const double excess = std::abs(grad[j]) - lambda * pw[j];
        if (excess > worst_excess) {
          worst_excess = excess;
          worst = j;
        }
      }
      if (worst < 0 && consistent) return true;
      if (worst >= 0 && consistent) {
        act.push_back(worst);
        sgn[worst] = grad[worst] > 0.0 ? 1.0 : -1.0;
      }
    }
    return false;
  };

  std::vector<Eigen::Index> active;
  int sweeps = 0;
  auto record = [&]() {
    ++sweeps;
    if (trace) trace->push_back(problem.objective(beta, lambda, pw));
  };
  auto fail = [&]() {
    const double gap = problem.duality_gap(beta, lambda, pw);
    std::ostringstream msg;
    msg << "coordinate descent did not converge in " << options.max_sweeps
        << " sweeps (lambda=" << lambda << ", duality gap=" << gap << ")";
    throw ConvergenceFailure(msg.str(), gap);
  };

  constexpr int kPolishEvery = 20;
  while (true) {
    double change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) change = std::max(change, update(j));
    record();
    if (change < options.tolerance) break;
    if (sweeps >= options.max_sweeps) fail();

    active.clear();
    for (Eigen::Index j = 0; j < p; ++j) {
      if (beta[j] != 0.0) active.push_back(j);
    }
    int inner_sweeps = 0;
    while (true) {
      double inner = 0.0;
      for (auto j : active) inner = std::max(inner, update(j));
      record();
      ++inner_sweeps;
      if (inner < options.tolerance) break;
      if (inner_sweeps % kPolishEvery == 0) {
        polish();
        if (trace) trace->back() = problem.objective(beta, lambda, pw);
        break;
      }
      if (sweeps >= options.max_sweeps) fail();
    }
  }
  return sweeps;
}

namespace {

// Piecewise-linear homotopy for the standardized problem. Returns exact
// solutions at a prefix of `lambdas`; the prefix ends early when the active
// Gram block becomes numerically singular or the event budget runs out.
std::vector<Eigen::VectorXd> homotopy(const GramProblem& problem, const std::vector<double>& lambdas,
                                      const Eigen::VectorXd& pw) {
  std::vector<Eigen::VectorXd> out;
  const auto p = problem.features();
  const auto& H = problem.gram();
  const auto& c = problem.xty();
  if (lambdas.empty() || p == 0) return out;

  std::vector<Eigen::Index> act;
  Eigen::VectorXd sgn = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd L(p, p);
  Eigen::MatrixXd HA(p, p);  // active columns of H, in active order
  auto pivot_ok = [&](double pivot, Eigen::Index j) { return pivot > 1e-10 * H(j, j); };
  auto append = [&](Eigen::Index j) -> bool {
    const auto k = static_cast<Eigen::Index>(act.size());
    Eigen::VectorXd l = H(act, j);
    if (k > 0) L.topLeftCorner(k, k).triangularView<Eigen::Lower>().solveInPlace(l);
    const double pivot = H(j, j) - l.squaredNorm();
    if (!pivot_ok(pivot, j)) return false;
    L.row(k).head(k) = l.transpose();
    L(k, k) = std::sqrt(pivot);
    HA.col(k) = H.col(j);
    act.push_back(j);
    return true;
  };
  // Delete position i from the factor and restore triangularity with Givens
  // rotations.
  auto remove = [&](std::size_t i) -> bool {
    const auto k = static_cast<Eigen::Index>(act.size());
    const auto at = static_cast<Eigen::Index>(i);
    for (Eigen::Index r = at; r + 1 < k; ++r) {
      L.row(r).head(k) = L.row(r + 1).head(k);
      HA.col(r) = HA.col(r + 1);
    }
    act.erase(act.begin() + static_cast<std::ptrdiff_t>(i));
    const Eigen::Index m = k - 1;
    for (Eigen::Index col = at; col < m; ++col) {
      Eigen::JacobiRotation<double> rot;
      rot.makeGivens(L(col, col), L(col, col + 1));
      L.block(col, 0, m - col, k).applyOnTheRight(col, col + 1, rot);
      if (L(col, col) < 0.0) L.block(col, col, m - col, 1) *= -1.0;
      if (!pivot_ok(L(col, col) * L(col, col), act[static_cast<std::size_t>(col)])) return false;
    }
    if (m > 0) L.col(m).head(m).setZero();
    return true;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (problem.usable(j) && pw[j] == 0.0 && !append(j)) return out;
  }
  auto solve_active = [&](const Eigen::VectorXd& rhs) {
    const auto k = static_cast<Eigen::Index>(act.size());
    Eigen::VectorXd x = rhs;
    const auto tri = L.topLeftCorner(k, k).triangularView<Eigen::Lower>();
    tri.solveInPlace(x);
    tri.transpose().solveInPlace(x);
    return x;
  };
  if (!act.empty()) beta(act) = solve_active(c(act));

  double lambda = lambdas.front();
  Eigen::VectorXd grad = c - HA.leftCols(static_cast<Eigen::Index>(act.size())) * beta(act);
  // The first penalized entrant at the top of the grid.
  {
    Eigen::Index best = -1;
    double best_ratio = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!problem.usable(j) || pw[j] == 0.0) continue;
      const double r = std::abs(grad[j]) / pw[j];
      if (r > best_ratio) {
        best_ratio = r;
        best = j;
      }
    }
    if (best < 0) {
      out.assign(lambdas.size(), beta);
      return out;
    }
    lambda = std::max(lambda, best_ratio);
  }

  const double floor = 1e-15 * std::max(lambda, 1e-300);
  const std::size_t budget = 20 * static_cast<std::size_t>(p) + 100;
  Eigen::Index last_drop = -1;
  std::size_t grid_at = 0;
  for (std::size_t events = 0; events < budget && grid_at < lambdas.size(); ++events) {
    // Record grid points reached before any further movement.
    while (grid_at < lambdas.size() && lambdas[grid_at] >= lambda) {
      grad = c - HA.leftCols(static_cast<Eigen::Index>(act.size())) * beta(act);
      out.push_back(beta);
      ++grid_at;
    }
    if (grid_at >= lambdas.size()) break;

    // Entrants whose gradient already sits at the bound join now.
    Eigen::Index joiner = -1;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!problem.usable(j) || pw[j] == 0.0 || sgn[j] != 0.0 || j == last_drop) continue;
      if (std::abs(grad[j]) >= lambda * pw[j] * (1.0 - 1e-12)) {
        joiner = j;
        break;
      }
    }
    if (joiner >= 0) {
      if (!append(joiner)) return out;
      sgn[joiner] = grad[joiner] > 0.0 ? 1.0 : -1.0;
      last_drop = -1;
      continue;
    }

    const auto k = static_cast<Eigen::Index>(act.size());
    Eigen::VectorXd ws(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto j = act[static_cast<std::size_t>(i)];
      ws[i] = pw[j] * sgn[j];
    }
    // beta_A(lambda - delta) = beta_A + delta * d
    const Eigen::VectorXd d = solve_active(ws);
    const Eigen::VectorXd a = HA.leftCols(k) * d;  // grad moves by -delta * a

    double step = lambda - lambdas[grid_at];
    Eigen::Index event = -1;
    bool is_drop = false;
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto j = act[static_cast<std::size_t>(i)];
      if (pw[j] == 0.0 || d[i] == 0.0) continue;
      const double t = -beta[j] / d[i];
      if (t > floor && t < step) {
        step = t;
        event = j;
        is_drop = true;
      }
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!problem.usable(j) || pw[j] == 0.0 || sgn[j] != 0.0 || j == last_drop) continue;
      // grad_j - t a_j = +-(lambda - t) pw_j
      const double up = pw[j] - a[j];
      if (up > 0.0) {
        const double t = (lambda * pw[j] - grad[j]) / up;
        if (t > floor && t < step) {
          step = t;
          event = j;
          is_drop = false;
        }
      }
      const double down = pw[j] + a[j];
      if (down > 0.0) {
        const double t = (lambda * pw[j] + grad[j]) / down;
        if (t > floor && t < step) {
          step = t;
          event = j;
          is_drop = false;
        }
      }
    }

    for (Eigen::Index i = 0; i < k; ++i) beta[act[static_cast<std::size_t>(i)]] += step * d[i];
    lambda -= step;
    if (event < 0) lambda = lambdas[grid_at];
    if (event >= 0 && is_drop) {
      beta[event] = 0.0;
      sgn[event] = 0.0;
      const auto pos = std::find(act.begin(), act.end(), event) - act.begin();
      if (!remove(static_cast<std::size_t>(pos))) return out;
      last_drop = event;
    } else if (event >= 0) {
      if (!append(event)) return out;
      sgn[event] = grad[event] - step * a[event] > 0.0 ? 1.0 : -1.0;
      last_drop = -1;
    }
    grad -= step * a;
  }
  return out;
}

}  // namespace

PathFit solve_path(const GramProblem& problem, const std::vector<double>& lambdas,
                   const Eigen::VectorXd& pw, const SolverOptions& options) {
  for (std::size_t k = 1; k < lambdas.size(); ++k) {
    if (!(lambdas[k] < lambdas[k - 1])) throw InvalidInput("lambda grid must be strictly decreasing");
  }
  PathFit path;
  const auto exact = homotopy(problem, lambdas, pw);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(problem.features());
  double previous = 0.0;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (k < exact.size()) beta = exact[k];
    path.sweeps += solve_standardized(problem, lambdas[k], pw, beta, options);
    path.lambdas.push_back(lambdas[k]);
    path.betas.push_back(beta);
    const double dev = problem.deviance_ratio(beta);
    if (k + 1 >= options.path_min_steps) {
      if (options.path_max_dev_ratio > 0.0 && dev > options.path_max_dev_ratio) break;
      if (options.path_min_dev_change > 0.0 && dev - previous < options.path_min_dev_change * dev) break;
    }
    previous = dev;
  }
  return path;
}

LassoFit coordinate_descent(const Eigen::Ref<const Eigen::MatrixXd>& X,
                            const Eigen::Ref<const Eigen::VectorXd>& y, double lambda,
                            const Eigen::VectorXd& penalty_weights,
                            const Eigen::VectorXd* obs_weights, const SolverOptions& options) {
  if (penalty_weights.size() != X.cols()) throw InvalidInput("penalty weights: length mismatch");
  if ((penalty_weights.array() < 0.0).any()) throw InvalidInput("penalty weights must be nonnegative");
  const GramProblem problem(Moments::compute(X, y, obs_weights), options.fit_intercept);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  const int sweeps = solve_standardized(problem, lambda, penalty_weights, beta, options);
  auto fit = problem.to_original_scale(beta, lambda, penalty_weights);
  fit.sweeps = sweeps;
  return fit;
}

double kkt_violation(const Eigen::Ref<const Eigen::MatrixXd>& X,
                     const Eigen::Ref<const Eigen::VectorXd>& y, const LassoFit& fit,
                     const Eigen::VectorXd& penalty_weights, const Eigen::VectorXd* obs_weights,
                     bool fit_intercept) {
  const Eigen::VectorXd w = unit_or(obs_weights, X.rows());
  const double n = static_cast<double>(X.rows());
  const double wsum = w.sum();
  const Eigen::VectorXd resid = (y - X * fit.coefficients).array() - fit.intercept;
  Eigen::RowVectorXd center = Eigen::RowVectorXd::Zero(X.cols());
  double ybar = 0.0;
  if (fit_intercept) {
    center = (w.transpose() * X) / wsum;
    ybar = w.dot(y) / wsum;
  }
  const Eigen::MatrixXd Xc = X.rowwise() - center;
  const Eigen::VectorXd grad = Xc.transpose() * w.cwiseProduct(resid) / n;
  const Eigen::VectorXd grad0 =
      Xc.transpose() * w.cwiseProduct((y.array() - ybar).matrix()) / n;
  const double scale = std::max(1.0, grad0.cwiseAbs().maxCoeff());

  double worst = fit_intercept ? std::abs(w.dot(resid)) / n : 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double sd = std::sqrt(Xc.col(j).cwiseAbs2().dot(w) / wsum);
    const double bound = fit.lambda * penalty_weights[j] * sd;
    const double b = fit.coefficients[j];
    double v;
    if (b != 0.0) {
      v = std::abs(grad[j] - bound * (b > 0.0 ? 1.0 : -1.0));
    } else {
      v = std::max(0.0, std::abs(grad[j]) - bound);
    }
    worst = std::max(worst, v);
  }
  return worst / scale;
}

std::vector<double> log_grid(double lambda_max, std::size_t count, double ratio) {
  if (count == 0) throw InvalidInput("lambda grid must be nonempty");
  if (!(lambda_max > 0.0)) return {0.0};
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lambda_max;
    return grid;
  }
  const double step = std::log(ratio) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) {
    grid[k] = lambda_max * std::exp(step * static_cast<double>(k));
  }
  return grid;
}

CvPlan make_cv_plan(const Eigen::Ref<const Eigen::MatrixXd>& rows, int folds, std::uint64_t seed) {
  const auto n = rows.rows();
  if (folds < 2) throw InvalidInput("cross-validation needs at least 2 folds");
  if (n < folds) throw InvalidInput("cross-validation needs at least as many rows as folds");
  std::vector<std::uint64_t> key(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint64_t h = mix64(seed);
    for (Eigen::Index j = 0; j < rows.cols(); ++j) h = hash_combine(h, rows(i, j));
    key[static_cast<std::size_t>(i)] = h;
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const auto ka = key[static_cast<std::size_t>(a)];
    const auto kb = key[static_cast<std::size_t>(b)];
    if (ka != kb) return ka < kb;
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (rows(a, j) != rows(b, j)) return rows(a, j) < rows(b, j);
    }
    return a < b;
  });
  CvPlan plan;
  plan.folds = folds;
  plan.fold_of.resize(static_cast<std::size_t>(n));
  for (std::size_t r = 0; r < order.size(); ++r) {
    plan.fold_of[static_cast<std::size_t>(order[r])] = static_cast<int>(r % static_cast<std::size_t>(folds));
  }
  return plan;
}

CrossValidator::CrossValidator(const Eigen::Ref<const Eigen::MatrixXd>& X,
                               const Eigen::Ref<const Eigen::VectorXd>& y, const CvPlan& plan,
                               const SolverOptions& options)
    : options_(options) {
  check_xy(X, y);
  const auto n = X.rows();
  if (static_cast<Eigen::Index>(plan.fold_of.size()) != n) {
    throw InvalidInput("cv plan does not cover every observation");
  }
  if (plan.folds < 2) throw InvalidInput("cross-validation needs at least 2 folds");
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(plan.folds));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int f = plan.fold_of[static_cast<std::size_t>(i)];
    if (f < 0 || f >= plan.folds) throw InvalidInput("cv plan: fold index out of range");
    members[static_cast<std::size_t>(f)].push_back(i);
  }
  std::vector<Moments> held_out;
  held_out.reserve(members.size());
  Moments full;
  for (std::size_t f = 0; f < members.size(); ++f) {
    const auto& idx = members[f];
    if (idx.empty()) throw InvalidInput("cv plan: fold " + std::to_string(f) + " has no observations");
    if (static_cast<Eigen::Index>(idx.size()) == n) {
      throw InvalidInput("cv plan: fold " + std::to_string(f) + " leaves no training rows");
    }
    held_out.push_back(Moments::compute(X(idx, Eigen::all), y(idx)));
    if (f == 0) {
      full = held_out.back();
    } else {
      full += held_out.back();
    }
  }
  full_ = GramProblem(full, options.fit_intercept);
  folds_.reserve(members.size());
  for (std::size_t f = 0; f < members.size(); ++f) {
    Moments train = full;
    train -= held_out[f];
    const auto& idx = members[f];
    folds_.push_back(Fold{GramProblem(train, options.fit_intercept), X(idx, Eigen::all), y(idx)});
    total_test_rows_ += static_cast<double>(idx.size());
  }
}

CvResult CrossValidator::run(const Eigen::VectorXd& pw, std::vector<double> lambdas) const {
  if (pw.size() != full_.features()) throw InvalidInput("penalty weights: length mismatch");
  if (lambdas.empty()) lambdas = log_grid(full_.lambda_max(pw));
  if (lambdas.empty()) throw InvalidInput("lambda grid is empty");
  for (std::size_t k = 1; k < lambdas.size(); ++k) {
    if (!(lambdas[k] < lambdas[k - 1])) throw InvalidInput("lambda grid must be strictly decreasing");
  }
  const auto full_path = solve_path(full_, lambdas, pw, options_);
  CvResult result;
  result.lambdas = full_path.lambdas;
  result.cv_error.assign(result.lambdas.size(), 0.0);
  for (const auto& fold : folds_) {
    const auto path = solve_path(fold.train, result.lambdas, pw, options_);
    for (std::size_t k = 0; k < result.lambdas.size(); ++k) {
      const auto& beta = path.betas[std::min(k, path.betas.size() - 1)];
      Eigen::VectorXd residual = fold.test_y;
      double intercept = fold.train.mean_y();
      for (Eigen::Index j = 0; j < beta.size(); ++j) {
        if (beta[j] == 0.0) continue;
        const double coef = beta[j] / fold.train.scale()[j];
        intercept -= fold.train.mean_x()[j] * coef;
        residual.noalias() -= fold.test_x.col(j) * coef;
      }
      result.cv_error[k] += (residual.array() - intercept).square().sum();
    }
  }
  for (auto& e : result.cv_error) e /= total_test_rows_;
  // Grid is decreasing, so a strict comparison keeps the larger lambda on ties.
  for (std::size_t k = 1; k < result.lambdas.size(); ++k) {
    if (result.cv_error[k] < result.cv_error[result.best_index]) result.best_index = k;
  }
  result.best_lambda = result.lambdas[result.best_index];
  result.best_fit = full_.to_original_scale(full_path.betas[result.best_index], result.best_lambda, pw);
  result.best_fit.sweeps = full_path.sweeps;
  return result;
}

CvResult cross_validate(const Eigen::Ref<const Eigen::MatrixXd>& X,
                        const Eigen::Ref<const Eigen::VectorXd>& y, std::vector<double> grid,
                        int folds, std::uint64_t seed, const Eigen::VectorXd& penalty_weights,
                        const SolverOptions& options) {
  check_xy(X, y);
  Eigen::MatrixXd content(X.rows(), X.cols() + 1);
  content << X, y;
  auto plan = make_cv_plan(content, folds, seed);
  const CrossValidator cv(X, y, plan, options);
  return cv.run(penalty_weights, std::move(grid));
}

LinearFit solve_wls(const Eigen::Ref<const Eigen::MatrixXd>& X,
                    const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::VectorXd* obs_weights,
                    bool fit_intercept) {
  check_xy(X, y);
  const Eigen::VectorXd w = unit_or(obs_weights, X.rows());
  const double wsum = w.sum();
  if (!(wsum > 0.0)) throw InvalidInput("weighted least squares: all weights are zero");
  LinearFit out;
  Eigen::RowVectorXd center = Eigen::RowVectorXd::Zero(X.cols());
  double ybar = 0.0;
  if (fit_intercept) {
    center = (w.transpose() * X) / wsum;
    ybar = w.dot(y) / wsum;
  }
  out.coefficients = Eigen::VectorXd::Zero(X.cols());
  if (X.cols() > 0) {
    const Eigen::VectorXd root = w.array().sqrt();
    const Eigen::MatrixXd design = root.asDiagonal() * (X.rowwise() - center);
    const Eigen::VectorXd target = root.cwiseProduct((y.array() - ybar).matrix());
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
    out.coefficients = cod.solve(target);
    out.rank_deficient = cod.rank() < X.cols();
  }
  out.intercept = fit_intercept ? ybar - center.dot(out.coefficients) : 0.0;
  return out;
}

LassoFit relaxed_refit(const Eigen::Ref<const Eigen::MatrixXd>& X,
                       const Eigen::Ref<const Eigen::VectorXd>& y,
                       const std::vector<Eigen::Index>& support, const Eigen::VectorXd* obs_weights,
                       bool fit_intercept) {
  std::vector<Eigen::Index> cols = support;
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  for (auto j : cols) {
    if (j < 0 || j >= X.cols()) throw InvalidInput("relaxed refit: support index out of range");
  }
  const Eigen::MatrixXd sub = X(Eigen::all, cols);
  const auto sol = solve_wls(sub, y, obs_weights, fit_intercept);
  LassoFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(X.cols());
  for (std::size_t k = 0; k < cols.size(); ++k) {
    fit.coefficients[cols[k]] = sol.coefficients[static_cast<Eigen::Index>(k)];
  }
  fit.intercept = sol.intercept;
  fit.support = std::move(cols);
  fit.lambda = 0.0;
  const Eigen::VectorXd w = unit_or(obs_weights, X.rows());
  const Eigen::VectorXd r = (y - X * fit.coefficients).array() - fit.intercept;
  fit.objective_value = 0.5 * r.cwiseAbs2().dot(w) / static_cast<double>(X.rows());
  return fit;
}

Eigen::VectorXd solve_gram(const Eigen::Ref<const Eigen::MatrixXd>& G,
                           const Eigen::Ref<const Eigen::VectorXd>& b, bool* rank_deficient) {
  if (G.rows() != G.cols() || G.rows() != b.size()) throw InvalidInput("gram system: shape mismatch");
  if (!G.allFinite() || !b.allFinite()) throw InvalidInput("gram system: non-finite entries");
  if (G.rows() == 0) {
    if (rank_deficient) *rank_deficient = false;
    return Eigen::VectorXd(0);
  }
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(G);
  if (rank_deficient) *rank_deficient = cod.rank() < G.rows();
  return cod.solve(b);
}

}  // namespace adml::lasso
