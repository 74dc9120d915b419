#include "fovcbf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fovcbf {

namespace {

constexpr double kFeasTol = 1e-11;
constexpr double kInf = std::numeric_limits<double>::infinity();

using ActiveMatrix = Eigen::Matrix<double, 6, Eigen::Dynamic, 0, 6, 6>;

double slack(const ConstraintRow& row, const Vec6& x) { return row.gradient().dot(x) + row.constant; }

ConstraintRow row_from(const Vec6& g, double c) {
  ConstraintRow r;
  r.v_coeff = g.head<3>();
  r.w_coeff = g.tail<3>();
  r.constant = c;
  return r;
}

}  // namespace

std::string_view to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::max_iter: return "max_iter";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::bypassed: return "bypassed";
  }
  return "unknown";
}

std::vector<ConstraintRow> expanded_rows(const QpProblem& problem) {
  std::vector<ConstraintRow> rows = problem.rows;
  if (problem.box) {
    for (int k = 0; k < 6; ++k) {
      Vec6 e = Vec6::Unit(k);
      rows.push_back(row_from(-e, problem.box->upper(k)));
      rows.push_back(row_from(e, -problem.box->lower(k)));
    }
  }
  return rows;
}

QpSolution SafetyQp::solve_affine(const QpProblem& problem) {
  scratch_rows_ = expanded_rows(problem);
  return solve_rows(problem.nominal, scratch_rows_);
}

// Dual active-set iteration with H = I: start from the unconstrained
// minimizer and repeatedly add the most violated row, dropping rows whose
// multiplier would turn negative. The null-space projection and the dual
// step are recomputed from a QR of the active normals.
QpSolution SafetyQp::solve_rows(const Twist& nominal, std::span<const ConstraintRow> rows) {
  if (rows.size() > kMaxRows) throw std::invalid_argument("too many constraint rows");

  const Vec6 u0 = nominal.vector();
  Vec6 x = u0;
  std::vector<int> active;
  std::vector<double> lambda;
  active.reserve(6);
  lambda.reserve(6);

  QpSolution sol;
  sol.status = QpStatus::max_iter;
  int iterations = 0;

  auto is_active = [&](int k) { return std::find(active.begin(), active.end(), k) != active.end(); };

  while (true) {
    int p = -1;
    double worst = -kFeasTol;
    for (int k = 0; k < static_cast<int>(rows.size()); ++k) {
      if (is_active(k)) continue;
      const double s = slack(rows[k], x);
      if (s < worst) {
        worst = s;
        p = k;
      }
    }
    if (p < 0) {
      sol.status = QpStatus::optimal;
      break;
    }

    const Vec6 np = rows[p].gradient();
    double lambda_p = 0.0;
    bool added = false;
    bool failed = false;
    while (!added) {
      if (iterations >= kMaxIterations) {
        failed = true;
        break;
      }
      ++iterations;

      const int q = static_cast<int>(active.size());
      Vec6 z = np;
      Eigen::VectorXd r(q);
      if (q > 0) {
        ActiveMatrix n(6, q);
        for (int k = 0; k < q; ++k) n.col(k) = rows[active[k]].gradient();
        Eigen::HouseholderQR<ActiveMatrix> qr(n);
        const Eigen::Matrix<double, 6, 6> qm = qr.householderQ();
        const Vec6 d = qm.transpose() * np;
        z = qm.rightCols(6 - q) * d.tail(6 - q);
        const Eigen::MatrixXd rr = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
        r = rr.triangularView<Eigen::Upper>().solve(d.head(q));
      }

      double t1 = kInf;
      int drop = -1;
      for (int k = 0; k < q; ++k) {
        if (r(k) > 0.0) {
          const double t = lambda[k] / r(k);
          if (t < t1) {
            t1 = t;
            drop = k;
          }
        }
      }
      double t2 = kInf;
      const double zn = z.dot(np);
      if (z.norm() > 1e-12 * np.norm() && zn > 0.0) t2 = -slack(rows[p], x) / zn;

      if (t1 == kInf && t2 == kInf) {
        sol.status = QpStatus::infeasible;
        failed = true;
        break;
      }
      const double t = std::min(t1, t2);
      if (t2 < kInf) x += t * z;
      for (int k = 0; k < q; ++k) lambda[k] -= t * r(k);
      lambda_p += t;

      if (t2 <= t1) {
        active.push_back(p);
        lambda.push_back(lambda_p);
        added = true;
      } else {
        active.erase(active.begin() + drop);
        lambda.erase(lambda.begin() + drop);
      }
    }
    if (failed) break;
  }

  std::vector<int> order(active.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return active[a] < active[b]; });
  for (int k : order) {
    sol.active_set.push_back(active[k]);
    sol.multipliers.push_back(std::max(0.0, lambda[k]));
  }
  sol.u = Twist::from_vector(x);
  sol.objective = (x - u0).squaredNorm();
  sol.iterations = iterations;
  return sol;
}

QpSolution SafetyQp::solve_robust(const QpProblem& problem, std::span<const ConcaveConstraint* const> robust) {
  auto robust_ok = [&](const Twist& u, double tol) {
    for (const auto* g : robust) {
      if (g->value(u) < -tol) return false;
    }
    return true;
  };

  QpSolution sol = solve_affine(problem);
  if (sol.status == QpStatus::infeasible || robust_ok(sol.u, kRobustTolerance)) return sol;

  const std::vector<ConstraintRow> base = expanded_rows(problem);
  const std::size_t room = kMaxRows > base.size() ? kMaxRows - base.size() : 0;
  std::deque<ConstraintRow> cuts;
  int iterations = sol.iterations;
  Twist u = sol.u;

  for (int outer = 0; outer < kMaxOuterIterations; ++outer) {
    for (const auto* g : robust) {
      const double value = g->value(u);
      if (value >= -kRobustTolerance) continue;
      const Vec6 grad = g->supergradient(u);
      cuts.push_back(row_from(grad, value - grad.dot(u.vector())));
      if (cuts.size() > room) cuts.pop_front();
    }
    scratch_rows_ = base;
    scratch_rows_.insert(scratch_rows_.end(), cuts.begin(), cuts.end());
    QpSolution next = solve_rows(problem.nominal, scratch_rows_);
    iterations += next.iterations;
    if (next.status == QpStatus::infeasible) break;
    u = next.u;
    if (next.status == QpStatus::optimal && robust_ok(u, kRobustTolerance)) {
      next.iterations = iterations;
      // report the active set against the problem rows only
      std::vector<int> act;
      std::vector<double> mult;
      for (std::size_t k = 0; k < next.active_set.size(); ++k) {
        if (next.active_set[k] < static_cast<int>(base.size())) {
          act.push_back(next.active_set[k]);
          mult.push_back(next.multipliers[k]);
        }
      }
      next.active_set = std::move(act);
      next.multipliers = std::move(mult);
      return next;
    }
  }

  QpSolution out;
  out.iterations = iterations;
  out.fallback = true;
  if (!robust_ok(Twist::zero(), 0.0)) {
    out.status = QpStatus::infeasible;
    out.u = Twist::zero();
    out.objective = problem.nominal.vector().squaredNorm();
    return out;
  }
  // The feasible set is convex and contains 0, so feasibility along [0, u]
  // is an interval starting at 0.
  const Vec6 dir = u.vector();
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (robust_ok(Twist::from_vector(mid * dir), 0.0) ? lo : hi) = mid;
  }
  out.status = QpStatus::max_iter;
  out.u = Twist::from_vector(lo * dir);
  out.objective = (out.u.vector() - problem.nominal.vector()).squaredNorm();
  return out;
}

double kkt_residual(const QpProblem& problem, const QpSolution& solution) {
  const auto rows = expanded_rows(problem);
  const Vec6 x = solution.u.vector();
  Vec6 stationarity = x - problem.nominal.vector();
  double res = 0.0;
  for (std::size_t k = 0; k < solution.active_set.size(); ++k) {
    const auto& row = rows[solution.active_set[k]];
    const double lam = solution.multipliers[k];
    stationarity -= lam * row.gradient();
    res = std::max(res, std::abs(lam * slack(row, x)));
    res = std::max(res, -lam);
  }
  for (const auto& row : rows) res = std::max(res, -slack(row, x));
  return std::max(res, stationarity.lpNorm<Eigen::Infinity>());
}

}  // namespace fovcbf
