#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bcbf/barriers.hpp"
#include "bcbf/errors.hpp"
#include "bcbf/safety_filter.hpp"
#include "oracles.hpp"

using namespace bcbf;

namespace {

struct Config {
  RobotState x;
  ObjectState o;
};

Config random_config(std::mt19937_64& rng, double min_sep) {
  std::uniform_real_distribution<double> pos(-3.0, 3.0);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  for (;;) {
    Config c{{pos(rng), pos(rng), ang(rng)}, {pos(rng), pos(rng)}};
    if (std::hypot(c.x.px - c.o.qx, c.x.py - c.o.qy) > min_sep) return c;
  }
}

using BarrierFn = std::function<BarrierEval(const RobotState&, const ObjectState&)>;
using ValueFn = std::function<double(const RobotState&, const ObjectState&)>;

void check_derivatives(const BarrierFn& eval, const ValueFn& value, const Config& c, double tol) {
  const BarrierEval e = eval(c.x, c.o);
  const double step = 1e-5;
  ASSERT_NEAR(e.h, value(c.x, c.o), 1e-14);

  const std::function<double(const Vec3&)> fx = [&](const Vec3& v) { return value(RobotState::from_vector(v), c.o); };
  const std::function<double(const Vec2&)> fo = [&](const Vec2& v) { return value(c.x, ObjectState::from_vector(v)); };
  const auto dx = oracle::finite_diff<3>(fx, c.x.as_vector(), step);
  const auto dox = oracle::finite_diff<2>(fo, c.o.as_vector(), step);
  EXPECT_LE(oracle::rel_err_mat(e.grad_x, dx.grad), tol);
  EXPECT_LE(oracle::rel_err_mat(e.grad_o, dox.grad), tol);

  // Hessians as central differences of the (separately verified) analytic gradients.
  Mat3 hx;
  for (int i = 0; i < 3; ++i) {
    Vec3 d = Vec3::Zero();
    d(i) = step;
    hx.col(i) = (eval(RobotState::from_vector(c.x.as_vector() + d), c.o).grad_x -
                 eval(RobotState::from_vector(c.x.as_vector() - d), c.o).grad_x) /
                (2.0 * step);
  }
  Mat2 ho;
  for (int i = 0; i < 2; ++i) {
    Vec2 d = Vec2::Zero();
    d(i) = step;
    ho.col(i) = (eval(c.x, ObjectState::from_vector(c.o.as_vector() + d)).grad_o -
                 eval(c.x, ObjectState::from_vector(c.o.as_vector() - d)).grad_o) /
                (2.0 * step);
  }
  EXPECT_LE(oracle::rel_err_mat(e.hess_x, hx), tol);
  EXPECT_LE(oracle::rel_err_mat(e.hess_o, ho), tol);
  EXPECT_LE((e.hess_x - e.hess_x.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((e.hess_o - e.hess_o.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace

TEST(Frames, LocalFrameExamples) {
  const Vec2 a = local_frame({0, 0, 0}, {1, 0});
  EXPECT_NEAR(a.x(), 1.0, 1e-15);
  EXPECT_NEAR(a.y(), 0.0, 1e-15);
  const Vec2 b = local_frame({0, 0, std::numbers::pi / 2}, {0, 1});
  EXPECT_NEAR(b.x(), 1.0, 1e-15);
  EXPECT_NEAR(b.y(), 0.0, 1e-15);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const Config c = random_config(rng, 0.0);
    const ObjectState back = world_frame(c.x, local_frame(c.x, c.o));
    EXPECT_NEAR(back.qx, c.o.qx, 1e-12);
    EXPECT_NEAR(back.qy, c.o.qy, 1e-12);
  }
}

TEST(FovBarrier, SymmetricOnTheAxis) {
  ModelParams p;
  const double d = 2.5;
  const ObjectState o = world_frame({1.0, -2.0, 0.7}, Vec2(d, 0.0));
  const double expect = std::tan(p.beta / 2) * d - p.r_o / std::cos(p.beta / 2);
  EXPECT_NEAR(fov_barrier_value({1.0, -2.0, 0.7}, o, p, FovSide::kFirst), expect, 1e-12);
  EXPECT_NEAR(fov_barrier_value({1.0, -2.0, 0.7}, o, p, FovSide::kSecond), expect, 1e-12);
}

TEST(FovBarrier, ZeroLevelSetTouchesTheSectorEdge) {
  // Centre r_o inside the upper edge: the disk is tangent to that edge.
  ModelParams p;
  const double half = p.beta / 2;
  const double along = 3.0;
  const Vec2 edge(std::cos(half), std::sin(half));
  const Vec2 inward(std::sin(half), -std::cos(half));
  const Vec2 centre = along * edge + p.r_o * inward;
  const ObjectState o{centre.x(), centre.y()};
  const double h1 = fov_barrier_value({0, 0, 0}, o, p, FovSide::kFirst);
  const double h2 = fov_barrier_value({0, 0, 0}, o, p, FovSide::kSecond);
  EXPECT_NEAR(std::min(h1, h2), 0.0, 1e-12);
  EXPECT_GT(std::max(h1, h2), 0.0);
}

TEST(FovBarrier, DerivativesMatchFiniteDifferences) {
  ModelParams p;
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const Config c = random_config(rng, 0.0);
    for (FovSide side : {FovSide::kFirst, FovSide::kSecond}) {
      check_derivatives([&](const RobotState& x, const ObjectState& o) { return fov_barrier(x, o, p, side); },
                        [&](const RobotState& x, const ObjectState& o) { return fov_barrier_value(x, o, p, side); },
                        c, 1e-5);
    }
  }
}

TEST(FovBarrier, ContainmentEquivalence) {
  ModelParams p;
  std::mt19937_64 rng(3);
  const double half = p.beta / 2;
  int checked = 0;
  for (int t = 0; t < 2000; ++t) {
    const Config c = random_config(rng, 0.0);
    const double h1 = fov_barrier_value(c.x, c.o, p, FovSide::kFirst);
    const double h2 = fov_barrier_value(c.x, c.o, p, FovSide::kSecond);
    if (std::fabs(h1) < 1e-3 || std::fabs(h2) < 1e-3) continue;
    const Vec2 l = local_frame(c.x, c.o);
    bool inside = true;
    for (int k = 0; k < 3600 && inside; ++k) {
      const double a = 2.0 * std::numbers::pi * k / 3600.0;
      const Vec2 q = l + p.r_o * Vec2(std::cos(a), std::sin(a));
      inside = q.x() > 0.0 && std::fabs(std::atan2(q.y(), q.x())) <= half;
    }
    EXPECT_EQ(h1 >= 0.0 && h2 >= 0.0, inside) << h1 << " " << h2;
    ++checked;
  }
  EXPECT_GT(checked, 1500);
}

TEST(CollisionBarrier, CollinearExample) {
  ModelParams p;
  p.s_e = 0.0;
  p.r_e = 0.5;
  p.r_o = 0.5;
  const BarrierEval e = collision_barrier({0, 0, 0}, {2, 0}, p);
  EXPECT_NEAR(e.h, 1.0, 1e-15);
  EXPECT_NEAR(e.grad_o.x(), 1.0, 1e-15);
  EXPECT_NEAR(e.grad_o.y(), 0.0, 1e-15);
}

TEST(CollisionBarrier, TranslationInvariant) {
  ModelParams p;
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const Config c = random_config(rng, 0.5);
    const double dx = std::uniform_real_distribution<double>(-10, 10)(rng);
    const double dy = std::uniform_real_distribution<double>(-10, 10)(rng);
    const double h0 = collision_barrier_value(c.x, c.o, p);
    const double h1 = collision_barrier_value({c.x.px + dx, c.x.py + dy, c.x.theta}, {c.o.qx + dx, c.o.qy + dy}, p);
    EXPECT_NEAR(h0, h1, 1e-12);
  }
}

TEST(CollisionBarrier, GradientClosedForm) {
  ModelParams p;
  const RobotState x{0.3, -0.2, 0.9};
  const ObjectState o{1.7, 0.4};
  const Vec2 ph(x.px - o.qx + p.s_e * std::cos(x.theta), x.py - o.qy + p.s_e * std::sin(x.theta));
  const double n = ph.norm();
  const BarrierEval e = collision_barrier(x, o, p);
  EXPECT_NEAR(e.grad_x(0), ph.x() / n, 1e-15);
  EXPECT_NEAR(e.grad_x(1), ph.y() / n, 1e-15);
  EXPECT_NEAR(e.grad_x(2), p.s_e * (-std::sin(x.theta) * ph.x() + std::cos(x.theta) * ph.y()) / n, 1e-15);
  EXPECT_LT((e.hess_o - (Mat2::Identity() - ph * ph.transpose() / (n * n)) / n).norm(), 1e-14);
}

TEST(CollisionBarrier, DerivativesMatchFiniteDifferences) {
  ModelParams p;
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const Config c = random_config(rng, 0.5);
    check_derivatives([&](const RobotState& x, const ObjectState& o) { return collision_barrier(x, o, p); },
                      [&](const RobotState& x, const ObjectState& o) { return collision_barrier_value(x, o, p); }, c,
                      1e-5);
  }
}

TEST(CollisionBarrier, DegenerateGeometryThrows) {
  ModelParams p;
  const RobotState x{1.0, 1.0, 0.0};
  const ObjectState o{1.0 + p.s_e, 1.0};
  EXPECT_THROW(collision_barrier(x, o, p), DegenerateGeometry);
  EXPECT_THROW(collision_barrier_value(x, o, p), DegenerateGeometry);
}

TEST(EssentialBounds, BelowEveryReachableValue) {
  ModelParams p;
  EXPECT_DOUBLE_EQ(collision_essential_lb(p), -(p.r_e + p.r_o));
  const double lb = fov_essential_lb(p);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 10000; ++t) {
    // any object within the workspace disk around the robot
    const Vec2 l(p.workspace_radius * u(rng), p.workspace_radius * u(rng));
    if (l.norm() > p.workspace_radius) continue;
    const ObjectState o = world_frame({0, 0, 0.3}, l);
    EXPECT_GE(fov_barrier_value({0, 0, 0.3}, o, p, FovSide::kFirst), lb);
    EXPECT_GE(fov_barrier_value({0, 0, 0.3}, o, p, FovSide::kSecond), lb);
  }
}

namespace {

BeliefState cloud(std::mt19937_64& rng, std::size_t n, Vec2 centre, double spread) {
  std::normal_distribution<double> z(0.0, spread);
  BeliefState b;
  for (std::size_t i = 0; i < n; ++i) b.samples.push_back({centre.x() + z(rng), centre.y() + z(rng)});
  return b;
}

std::vector<BarrierEval> all_evals(BarrierKind kind, std::size_t i, const RobotState& x, const BeliefState& b,
                                   const ModelParams& p) {
  std::vector<BarrierEval> out;
  for (const auto& o : b.samples) {
    out.push_back(kind == BarrierKind::kCollision ? collision_barrier(x, o, p)
                                                  : fov_barrier(x, o, p, i == 0 ? FovSide::kFirst : FovSide::kSecond));
  }
  return out;
}

double h_tilde(const SafetyFilter& f, std::size_t i, const RobotState& x, const BeliefState& b) {
  return f.compose(i, x, b).h_tilde;
}

/// Smallest gap between the bound's pivot order statistic and its neighbours.
double pivot_gap(const std::vector<double>& h, std::size_t k) {
  const OrderedSamples o = order_descending(h);
  double g = std::numeric_limits<double>::infinity();
  if (k >= 2) g = std::min(g, o.values[k - 2] - o.values[k - 1]);
  if (k < h.size()) g = std::min(g, o.values[k - 1] - o.values[k]);
  return g;
}

}  // namespace

TEST(Compose, VarSelectsOneSample) {
  ModelParams p;
  std::mt19937_64 rng(7);
  const BeliefState b = cloud(rng, 60, Vec2(2.0, 1.0), 0.3);
  const RobotState x{0, 0, 0.2};
  const auto evals = all_evals(BarrierKind::kCollision, 0, x, b, p);
  std::vector<double> h;
  for (const auto& e : evals) h.push_back(e.h);
  const BoundResult r = lower_bound(h, RiskSpec::var(0.1, 0.05));
  const BcbfEval c = compose_bcbf(evals, r);
  ASSERT_EQ(c.blocks.size(), 1u);
  const std::size_t i = c.blocks[0].index;
  EXPECT_EQ(c.h_tilde, evals[i].h);
  EXPECT_EQ(c.grad_x, evals[i].grad_x);
  EXPECT_EQ(c.hess_x, evals[i].hess_x);
  EXPECT_EQ(c.blocks[0].grad, evals[i].grad_o);
  EXPECT_EQ(c.blocks[0].hess, evals[i].hess_o);
}

TEST(Compose, IdenticalSamplesGiveThatValue) {
  ModelParams p;
  BeliefState b;
  b.samples.assign(200, ObjectState{1.5, 0.5});
  const RobotState x{0, 0, 0};
  const auto evals = all_evals(BarrierKind::kCollision, 0, x, b, p);
  std::vector<double> h(200, evals[0].h);
  const BcbfEval c = compose_bcbf(evals, lower_bound(h, RiskSpec::cvar(0.1, 0.05, evals[0].h)));
  EXPECT_NEAR(c.h_tilde, evals[0].h, 1e-14);
}

TEST(Compose, LengthMismatchThrows) {
  std::vector<BarrierEval> evals(10);
  BoundResult r;
  r.weights.assign(9, 0.0);
  EXPECT_THROW(compose_bcbf(evals, r), std::invalid_argument);
}

TEST(Compose, AffineIdentitySparsityAndSymmetry) {
  ModelParams p;
  std::mt19937_64 rng(8);
  for (int t = 0; t < 40; ++t) {
    const BeliefState b = cloud(rng, 200, Vec2(2.0, 0.5), 0.5);
    const RobotState x{0, 0, 0.1};
    const double lb = collision_essential_lb(p);
    for (const RiskSpec& spec : {RiskSpec::var(0.1, 0.05), RiskSpec::cvar(0.1, 0.05, lb), RiskSpec::expectation(0.05, lb)}) {
      const auto evals = all_evals(BarrierKind::kCollision, 0, x, b, p);
      std::vector<double> h;
      for (const auto& e : evals) h.push_back(e.h);
      const BoundResult r = lower_bound(h, spec);
      const BcbfEval c = compose_bcbf(evals, r);
      double v = c.b_coeff * lb;
      for (const auto& blk : c.blocks) v += blk.weight * h[blk.index];
      EXPECT_NEAR(v, c.h_tilde, 1e-12);
      EXPECT_EQ(c.active_set(), r.active_set());
      if (spec.measure == RiskMeasure::kCVaR) {
        const OrderedSamples o = order_descending(h);
        std::vector<bool> allowed(h.size(), false);
        for (std::size_t j = r.k_index; j <= h.size(); ++j) allowed[o.perm[j - 1]] = true;
        for (const auto& blk : c.blocks) EXPECT_TRUE(allowed[blk.index]);
      }
      EXPECT_LE((c.hess_x - c.hess_x.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      for (const auto& blk : c.blocks) EXPECT_LE(std::fabs(blk.hess(0, 1) - blk.hess(1, 0)), 1e-12);

      const BcbfEval a = compose_bcbf_active(r, [&](std::size_t i) { return evals[i]; });
      EXPECT_EQ(a.h_tilde, c.h_tilde);
      EXPECT_LT((a.grad_x - c.grad_x).norm(), 1e-14);
      EXPECT_EQ(a.blocks.size(), c.blocks.size());
    }
  }
}

TEST(Compose, FilterCompositionMatchesDirectEvaluation) {
  ModelParams p;
  FilterConfig cfg;
  cfg.risk = RiskSpec::cvar(0.1, 0.05, 0.0);
  std::mt19937_64 rng(9);
  const BeliefState b = cloud(rng, 200, Vec2(0.3, 3.0), 0.3);
  const RobotState x{0.1, -0.1, 1.4};
  const SafetyFilter f(BarrierKind::kFov, p, cfg, ReferenceGains{}, b.size());
  for (std::size_t i = 0; i < 2; ++i) {
    const auto evals = all_evals(BarrierKind::kFov, i, x, b, p);
    std::vector<double> h;
    for (const auto& e : evals) h.push_back(e.h);
    const BcbfEval ref = compose_bcbf(evals, lower_bound(h, f.barrier_spec(i)));
    const BcbfEval got = f.compose(i, x, b);
    EXPECT_NEAR(got.h_tilde, ref.h_tilde, 1e-12);
    EXPECT_LT((got.grad_x - ref.grad_x).norm(), 1e-12);
    EXPECT_LT((got.hess_x - ref.hess_x).norm(), 1e-12);
    ASSERT_EQ(got.blocks.size(), ref.blocks.size());
    for (std::size_t j = 0; j < got.blocks.size(); ++j) {
      EXPECT_EQ(got.blocks[j].index, ref.blocks[j].index);
      EXPECT_LT((got.blocks[j].grad - ref.blocks[j].grad).norm(), 1e-12);
    }
  }
}

TEST(Compose, DirectionalDerivativesMatchFiniteDifferences) {
  ModelParams p;
  std::mt19937_64 rng(10);
  std::normal_distribution<double> z(0.0, 1.0);
  int tested = 0;
  for (int t = 0; t < 100; ++t) {
    const bool fov = t % 2 == 0;
    const BarrierKind kind = fov ? BarrierKind::kFov : BarrierKind::kCollision;
    FilterConfig cfg;
    cfg.risk = t % 4 < 2 ? RiskSpec::var(0.1, 0.05) : RiskSpec::cvar(0.1, 0.05, 0.0);
    const BeliefState b = fov ? cloud(rng, 200, Vec2(0.2, 3.0), 0.3) : cloud(rng, 200, Vec2(1.5, 1.0), 0.4);
    const RobotState x{0.1 * z(rng), 0.1 * z(rng), fov ? 1.5 + 0.1 * z(rng) : 0.5 + 0.1 * z(rng)};
    const SafetyFilter f(kind, p, cfg, ReferenceGains{}, b.size());
    const std::size_t bi = fov ? static_cast<std::size_t>(t / 2 % 2) : 0;

    std::vector<double> h;
    for (const auto& e : all_evals(kind, bi, x, b, p)) h.push_back(e.h);
    const BoundResult r = lower_bound(h, f.barrier_spec(bi));
    if (pivot_gap(h, r.k_index) < 3e-4) continue;
    const BcbfEval c = f.compose(bi, x, b);

    Vec3 dx(z(rng), z(rng), z(rng));
    std::vector<Vec2> dob(b.size());
    for (auto& d : dob) d = Vec2(z(rng), z(rng));
    auto moved = [&](double s) {
      BeliefState m = b;
      for (std::size_t i = 0; i < m.size(); ++i) {
        m.samples[i].qx += s * dob[i].x();
        m.samples[i].qy += s * dob[i].y();
      }
      return m;
    };
    const double eps = 1e-6;

    // first order along (dx, dob) jointly
    double analytic = c.grad_x.dot(dx);
    for (const auto& blk : c.blocks) analytic += blk.grad.dot(dob[blk.index]);
    const double fd = (h_tilde(f, bi, RobotState::from_vector(x.as_vector() + eps * dx), moved(eps)) -
                       h_tilde(f, bi, RobotState::from_vector(x.as_vector() - eps * dx), moved(-eps))) /
                      (2.0 * eps);
    EXPECT_LE(oracle::rel_err(analytic, fd), 1e-4) << t;

    // second order along x alone and along the belief alone, as central
    // differences of the analytic first derivative
    auto gx_dir = [&](const BcbfEval& e) { return e.grad_x.dot(dx); };
    auto gb_dir = [&](const BcbfEval& e) {
      double s = 0.0;
      for (const auto& blk : e.blocks) s += blk.grad.dot(dob[blk.index]);
      return s;
    };
    const double fxx = (gx_dir(f.compose(bi, RobotState::from_vector(x.as_vector() + eps * dx), b)) -
                        gx_dir(f.compose(bi, RobotState::from_vector(x.as_vector() - eps * dx), b))) /
                       (2.0 * eps);
    EXPECT_LE(oracle::rel_err(dx.dot(c.hess_x * dx), fxx), 1e-4) << t;
    double bb = 0.0;
    for (const auto& blk : c.blocks) bb += dob[blk.index].dot(blk.hess * dob[blk.index]);
    const double fbb = (gb_dir(f.compose(bi, x, moved(eps))) - gb_dir(f.compose(bi, x, moved(-eps)))) / (2.0 * eps);
    EXPECT_LE(oracle::rel_err(bb, fbb), 1e-4) << t;
    ++tested;
  }
  EXPECT_GE(tested, 80);
}
