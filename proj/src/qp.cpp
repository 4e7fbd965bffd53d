#include "bcbf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace bcbf {

void QpSpec::validate() const {
  if (!Q.allFinite() || std::abs(Q(0, 1) - Q(1, 0)) > 1e-12 * (1.0 + Q.norm())) {
    throw std::invalid_argument("QP weight must be finite and symmetric");
  }
  Eigen::LLT<Mat2> llt(Q);
  if (llt.info() != Eigen::Success || Q.determinant() <= 0.0) {
    throw std::invalid_argument("QP weight must be positive definite");
  }
  if (!((lo.array() <= hi.array()).all())) throw std::invalid_argument("QP box requires lo <= hi");
  if (!u_ref.allFinite()) throw std::invalid_argument("QP reference must be finite");
  for (const auto& c : constraints) {
    if (!c.lin_u.allFinite() || !std::isfinite(c.rhs)) throw std::invalid_argument("QP constraint must be finite");
  }
}

namespace {

struct Row {
  Vec2 a;
  double r;
  int box_axis = -1;  // >= 0 for box faces: which coordinate is pinned
};

std::vector<Row> build_rows(const QpSpec& spec) {
  std::vector<Row> rows;
  rows.reserve(spec.constraints.size() + 4);
  for (const auto& c : spec.constraints) rows.push_back({c.lin_u, c.rhs, -1});
  rows.push_back({Vec2(1.0, 0.0), spec.lo.x(), 0});
  rows.push_back({Vec2(0.0, 1.0), spec.lo.y(), 1});
  rows.push_back({Vec2(-1.0, 0.0), -spec.hi.x(), 0});
  rows.push_back({Vec2(0.0, -1.0), -spec.hi.y(), 1});
  return rows;
}

double objective(const QpSpec& spec, const Vec2& u) {
  const Vec2 d = u - spec.u_ref;
  return d.dot(spec.Q * d);
}

double feas_tol(const Row& row) { return 1e-12 * (1.0 + std::abs(row.r) + row.a.lpNorm<1>()); }

bool feasible(const std::vector<Row>& rows, const Vec2& u) {
  return std::all_of(rows.begin(), rows.end(),
                     [&](const Row& row) { return row.a.dot(u) - row.r >= -feas_tol(row); });
}

// Pin box coordinates exactly so that box-active solutions hit the bound bit-for-bit.
void snap(const Row& row, Vec2& u) {
  if (row.box_axis >= 0) u[row.box_axis] = row.r / row.a[row.box_axis];
}

}  // namespace

Vec2 least_infeasible_point(const QpSpec& spec) {
  Vec2 u = spec.u_ref.cwiseMax(spec.lo).cwiseMin(spec.hi);
  double lip = 0.0;
  for (const auto& c : spec.constraints) lip += c.lin_u.squaredNorm();
  if (lip == 0.0) return u;
  const double step = 1.0 / (2.0 * lip);
  for (int it = 0; it < 2000; ++it) {
    Vec2 grad = Vec2::Zero();
    for (const auto& c : spec.constraints) {
      const double viol = c.rhs - c.lin_u.dot(u);
      if (viol > 0.0) grad -= 2.0 * viol * c.lin_u;
    }
    const Vec2 next = (u - step * grad).cwiseMax(spec.lo).cwiseMin(spec.hi);
    if ((next - u).norm() < 1e-14) break;
    u = next;
  }
  return u;
}

QpSolution solve_qp(const QpSpec& spec) {
  spec.validate();
  const std::vector<Row> rows = build_rows(spec);
  const Mat2 q_inv = spec.Q.inverse();
  const int m = static_cast<int>(rows.size());

  QpSolution best;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<int> best_set;

  auto consider = [&](const Vec2& u, std::vector<int> set) {
    if (!u.allFinite() || !feasible(rows, u)) return;
    const double f = objective(spec, u);
    if (f < best.objective) {
      best.objective = f;
      best.u = u;
      best_set = std::move(set);
    }
  };

  consider(spec.u_ref, {});
  for (int i = 0; i < m; ++i) {
    const Row& ri = rows[i];
    const Vec2 qa = q_inv * ri.a;
    const double denom = ri.a.dot(qa);
    if (denom <= 0.0) continue;
    Vec2 u = spec.u_ref + qa * ((ri.r - ri.a.dot(spec.u_ref)) / denom);
    snap(ri, u);
    consider(u, {i});
  }
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      Mat2 a;
      a.row(0) = rows[i].a.transpose();
      a.row(1) = rows[j].a.transpose();
      const double det = a.determinant();
      if (std::abs(det) <= 1e-14 * rows[i].a.norm() * rows[j].a.norm()) continue;
      Vec2 u = a.inverse() * Vec2(rows[i].r, rows[j].r);
      snap(rows[i], u);
      snap(rows[j], u);
      consider(u, {i, j});
    }
  }

  best.multipliers.assign(static_cast<std::size_t>(m), 0.0);
  if (!std::isfinite(best.objective)) {
    best.status = QpStatus::kInfeasible;
    best.u = least_infeasible_point(spec);
    best.objective = objective(spec, best.u);
    best.kkt_residual = std::numeric_limits<double>::infinity();
    return best;
  }
  best.status = QpStatus::kOptimal;

  // Multipliers from 2 Q (u - u_ref) = sum_j lambda_j a_j over the generating set.
  const Vec2 grad = 2.0 * spec.Q * (best.u - spec.u_ref);
  if (best_set.size() == 1) {
    const Vec2& a = rows[best_set[0]].a;
    best.multipliers[best_set[0]] = a.dot(grad) / a.squaredNorm();
  } else if (best_set.size() == 2) {
    Mat2 a;
    a.col(0) = rows[best_set[0]].a;
    a.col(1) = rows[best_set[1]].a;
    const Vec2 lam = a.inverse() * grad;
    best.multipliers[best_set[0]] = lam.x();
    best.multipliers[best_set[1]] = lam.y();
  }

  Vec2 stat = grad;
  double residual = 0.0;
  for (int i = 0; i < m; ++i) {
    const double lam = best.multipliers[i];
    const double slack = rows[i].a.dot(best.u) - rows[i].r;
    stat -= lam * rows[i].a;
    residual = std::max({residual, -lam, -slack, std::abs(lam * slack)});
  }
  best.kkt_residual = std::max(residual, stat.lpNorm<Eigen::Infinity>());
  return best;
}

}  // namespace bcbf
