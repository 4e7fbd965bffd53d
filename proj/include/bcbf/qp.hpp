#pragma once

// Exact solver for the two-input safety QP:
//   min (u - u_ref)^T Q (u - u_ref)  s.t.  a_j^T u >= r_j,  lo <= u <= hi.
//
// With m = 2 the optimum is the minimiser of the objective restricted to the
// affine hull of at most two active constraints, so every such subset is
// enumerated and the best feasible candidate is kept.

#include <vector>

#include "bcbf/linalg.hpp"

namespace bcbf {

/// Linear-in-u safety constraint: lin_u . u >= rhs.
struct CbfConstraint {
  Vec2 lin_u = Vec2::Zero();
  double rhs = 0.0;
};

struct QpSpec {
  Mat2 Q = Mat2::Identity();
  Vec2 u_ref = Vec2::Zero();
  Vec2 lo{-1.0, -1.0};
  Vec2 hi{1.0, 1.0};
  std::vector<CbfConstraint> constraints;

  void validate() const;
};

enum class QpStatus { kOptimal, kInfeasible };

struct QpSolution {
  Vec2 u = Vec2::Zero();
  QpStatus status = QpStatus::kOptimal;
  double objective = 0.0;
  /// One multiplier per row: the CBF constraints first, then lo_0, lo_1, hi_0, hi_1.
  std::vector<double> multipliers;
  /// Max of stationarity, dual, primal and complementarity residuals.
  double kkt_residual = 0.0;
};

QpSolution solve_qp(const QpSpec& spec);

/// Point of the box minimising the summed squared constraint violation.
Vec2 least_infeasible_point(const QpSpec& spec);

}  // namespace bcbf
