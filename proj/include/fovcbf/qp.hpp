#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fovcbf/pbvs.hpp"
#include "fovcbf/visibility_cbf.hpp"

namespace fovcbf {

struct BoxLimits {
  Vec6 lower;
  Vec6 upper;
};

/// min ||u - nominal||^2 subject to every row >= 0 (and optional box).
struct QpProblem {
  Twist nominal;
  std::vector<ConstraintRow> rows;
  std::optional<BoxLimits> box;
};

enum class QpStatus { optimal, max_iter, infeasible, bypassed };

std::string_view to_string(QpStatus s);

struct QpSolution {
  Twist u;
  QpStatus status = QpStatus::infeasible;
  std::vector<int> active_set;      // row indices; box rows follow the problem rows
  std::vector<double> multipliers;  // aligned with active_set, >= 0, for the 1/2-scaled objective
  double objective = 0.0;           // ||u - nominal||^2
  int iterations = 0;
  bool fallback = false;            // robust stage 2 used the segment fallback
};

/// Constraint g(u) >= 0 with g concave in u, e.g. the robust visibility bounds.
class ConcaveConstraint {
 public:
  virtual ~ConcaveConstraint() = default;
  virtual double value(const Twist& u) const = 0;
  virtual Vec6 supergradient(const Twist& u) const = 0;
};

/// Dense dual active-set solver (Goldfarb-Idnani with identity Hessian) for
/// the six-variable safety filter. Keeps its work buffers between calls;
/// one instance per control loop.
class SafetyQp {
 public:
  static constexpr int kMaxIterations = 200;
  static constexpr std::size_t kMaxRows = 64;
  static constexpr int kMaxOuterIterations = 20;
  static constexpr double kRobustTolerance = 1e-8;

  QpSolution solve_affine(const QpProblem& problem);

  /// Stage 1: affine QP on problem.rows. Stage 2: supporting-cut
  /// linearization of the concave rows from the stage-1 point; if that does
  /// not reach feasibility within kMaxOuterIterations, bisect along [0, u].
  QpSolution solve_robust(const QpProblem& problem, std::span<const ConcaveConstraint* const> robust);

 private:
  QpSolution solve_rows(const Twist& nominal, std::span<const ConstraintRow> rows);

  std::vector<ConstraintRow> scratch_rows_;
};

/// Worst stationarity/feasibility/complementarity residual of a solution.
double kkt_residual(const QpProblem& problem, const QpSolution& solution);

/// Rows of the problem with the box appended as +-u_k rows.
std::vector<ConstraintRow> expanded_rows(const QpProblem& problem);

}  // namespace fovcbf
