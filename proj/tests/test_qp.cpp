#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fovcbf/qp.hpp"
#include "fovcbf/robust.hpp"
#include "fovcbf/sim.hpp"
#include "oracles.hpp"

using namespace fovcbf;
using std::numbers::pi;

namespace {

ConstraintRow row_of(const Vec6& g, double c) {
  ConstraintRow r;
  r.v_coeff = g.head<3>();
  r.w_coeff = g.tail<3>();
  r.constant = c;
  return r;
}

Vec6 e(int k) { return Vec6::Unit(k); }

}  // namespace

TEST_CASE("feasible nominal is returned unchanged") {
  SafetyQp qp;
  QpProblem p;
  p.nominal = Twist::from_vector((Vec6() << 0.1, -0.2, 0.3, 0.0, 0.1, 0.0).finished());
  p.rows = {row_of(e(0), 1.0), row_of(-e(1), 1.0)};
  const QpSolution s = qp.solve_affine(p);
  CHECK(s.status == QpStatus::optimal);
  CHECK(s.u.vector() == p.nominal.vector());
  CHECK(s.active_set.empty());
  CHECK(s.objective == 0.0);
}

TEST_CASE("single violated halfspace") {
  SafetyQp qp;
  QpProblem p;
  p.nominal = Twist::from_vector(e(0));
  p.rows = {row_of(-e(0), 0.5)};  // u0 <= 0.5
  const QpSolution s = qp.solve_affine(p);
  CHECK(s.status == QpStatus::optimal);
  CHECK(std::abs(s.u.v.x() - 0.5) < 1e-15);
  CHECK(s.u.vector().tail<5>().isZero(0.0));
  REQUIRE(s.active_set.size() == 1);
  CHECK(s.active_set[0] == 0);
  CHECK(std::abs(s.multipliers[0] - 0.5) < 1e-15);
  CHECK(std::abs(s.objective - 0.25) < 1e-15);
}

TEST_CASE("infeasible problems are reported") {
  SafetyQp qp;
  QpProblem p;
  p.nominal = Twist::zero();
  p.rows = {row_of(e(2), -1.0), row_of(-e(2), 0.0)};  // u2 >= 1 and u2 <= 0
  CHECK(qp.solve_affine(p).status == QpStatus::infeasible);
}

TEST_CASE("box limits appear as extra rows") {
  SafetyQp qp;
  QpProblem p;
  p.nominal = Twist::from_vector((Vec6() << 2, -2, 0, 0, 0, 0.3).finished());
  p.box = BoxLimits{Vec6::Constant(-0.5), Vec6::Constant(0.5)};
  const QpSolution s = qp.solve_affine(p);
  CHECK((s.u.vector() - (Vec6() << 0.5, -0.5, 0, 0, 0, 0.3).finished()).norm() < 1e-14);
  CHECK(expanded_rows(p).size() == 12);
  CHECK(kkt_residual(p, s) < 1e-12);
}

TEST_CASE("random problems match active-set enumeration") {
  std::mt19937_64 rng(61);
  SafetyQp qp;
  int constrained = 0;
  for (int k = 0; k < 1000; ++k) {
    const int m = 1 + static_cast<int>(rng() % 10);
    const oracle::RandomQp q = oracle::random_qp(rng, m);
    const QpSolution s = qp.solve_affine(q.problem);
    const auto ref = oracle::enumerate_qp(q.problem.nominal.vector(), q.A, q.b);
    REQUIRE(ref.has_value());
    CHECK(s.status == QpStatus::optimal);
    CHECK((s.u.vector() - ref->u).norm() < 1e-6);
    CHECK(kkt_residual(q.problem, s) < 1e-8);
    if (!s.active_set.empty()) ++constrained;
  }
  CHECK(constrained > 500);
}

TEST_CASE("complementary slackness, idempotence and continuity") {
  std::mt19937_64 rng(62);
  SafetyQp qp;
  for (int k = 0; k < 300; ++k) {
    oracle::RandomQp q = oracle::random_qp(rng, 8);
    const QpSolution s = qp.solve_affine(q.problem);
    REQUIRE(s.active_set.size() == s.multipliers.size());
    for (std::size_t a = 0; a < s.active_set.size(); ++a) {
      CHECK(s.multipliers[a] >= 0.0);
      CHECK(std::abs(q.problem.rows[s.active_set[a]].evaluate(s.u)) < 1e-9);
    }
    // stationarity: u - nominal is the multiplier combination of active normals
    Vec6 combo = Vec6::Zero();
    for (std::size_t a = 0; a < s.active_set.size(); ++a)
      combo += s.multipliers[a] * q.problem.rows[s.active_set[a]].gradient();
    CHECK((s.u.vector() - q.problem.nominal.vector() - combo).norm() < 1e-9);

    QpProblem again = q.problem;
    again.nominal = s.u;
    CHECK((qp.solve_affine(again).u.vector() - s.u.vector()).norm() < 1e-10);

    QpProblem nudged = q.problem;
    nudged.nominal = Twist::from_vector(q.problem.nominal.vector() + 1e-6 * oracle::random_vec6(rng, 1.0));
    CHECK((qp.solve_affine(nudged).u.vector() - s.u.vector()).norm() <= 1e-3);
  }
}

TEST_CASE("row limit is enforced") {
  SafetyQp qp;
  QpProblem p;
  p.rows.assign(SafetyQp::kMaxRows + 1, row_of(e(0), 1.0));
  CHECK_THROWS(qp.solve_affine(p));
}

namespace {

struct RobustFixture {
  ScenarioConfig config = default_scenario();
  CameraModel camera = config.camera();
  RobustCamera robust = robust_camera(camera, config.bounds);
};

MarkerObservation random_marker(std::mt19937_64& rng) {
  return make_observation({rot_x(pi) * oracle::random_rotation(rng, 0.4), Vec3(0, 0, 0.4) + oracle::random_vec(rng, 0.06)},
                          0.1);
}

}  // namespace

TEST_CASE("robust solve with zero bounds equals the affine solve") {
  std::mt19937_64 rng(63);
  const ScenarioConfig c = default_scenario();
  const RobustCamera robust = robust_camera(c.camera(), {0.0, 0.0});
  SafetyQp qp;
  for (int k = 0; k < 100; ++k) {
    const MarkerObservation obs = random_marker(rng);
    QpProblem p;
    p.nominal = Twist::from_vector(oracle::random_vec6(rng, 1.0));
    const auto rows = visibility_constraint_rows(robust.camera, obs, c.estimated_extrinsics, 2.0);
    p.rows.assign(rows.begin(), rows.end());
    const auto theta = theta_lower_bounds(robust, obs, c.estimated_extrinsics, 2.0);
    std::array<const ConcaveConstraint*, 16> ptrs;
    for (int r = 0; r < 16; ++r) ptrs[r] = &theta[r];
    const QpSolution a = qp.solve_affine(p);
    const QpSolution b = qp.solve_robust(p, ptrs);
    CHECK((a.u.vector() - b.u.vector()).norm() < 1e-12);
    CHECK(a.status == b.status);
  }
}

TEST_CASE("robust solve keeps a feasible zero nominal") {
  RobustFixture f;
  const MarkerObservation obs = make_observation({rot_x(pi), Vec3(0, 0, 0.7)}, 0.1);
  const auto rows = visibility_constraint_rows(f.robust.camera, f.robust.shift(obs),
                                               f.robust.extrinsics(f.config.estimated_extrinsics), 2.0);
  QpProblem p;
  p.rows.assign(rows.begin(), rows.end());
  const auto theta = theta_lower_bounds(f.robust, obs, f.config.estimated_extrinsics, 2.0);
  std::array<const ConcaveConstraint*, 16> ptrs;
  for (int r = 0; r < 16; ++r) ptrs[r] = &theta[r];
  for (const auto& t : theta) REQUIRE(t.value(Twist::zero()) >= 0.0);
  SafetyQp qp;
  const QpSolution s = qp.solve_robust(p, ptrs);
  CHECK(s.status == QpStatus::optimal);
  CHECK(s.u.vector().isZero(0.0));
}

TEST_CASE("robust solve output satisfies every bound and every affine row") {
  std::mt19937_64 rng(64);
  RobustFixture f;
  SafetyQp qp;
  int cut = 0;
  for (int k = 0; k < 2000; ++k) {
    const MarkerObservation obs = random_marker(rng);
    const auto rows = visibility_constraint_rows(f.robust.camera, f.robust.shift(obs),
                                                 f.robust.extrinsics(f.config.estimated_extrinsics), 2.0);
    QpProblem p;
    p.nominal = Twist::from_vector(oracle::random_vec6(rng, 1.0));
    p.rows.assign(rows.begin(), rows.end());
    const auto theta = theta_lower_bounds(f.robust, obs, f.config.estimated_extrinsics, 2.0);
    std::array<const ConcaveConstraint*, 16> ptrs;
    for (int r = 0; r < 16; ++r) ptrs[r] = &theta[r];
    const QpSolution s = qp.solve_robust(p, ptrs);
    if (s.status == QpStatus::infeasible) {
      CHECK(s.u.vector().isZero(0.0));
      continue;
    }
    for (const auto& r : p.rows) CHECK(r.evaluate(s.u) >= -1e-9);
    for (const auto& t : theta) CHECK(t.value(s.u) >= -SafetyQp::kRobustTolerance);
    if ((s.u.vector() - qp.solve_affine(p).u.vector()).norm() > 1e-9) ++cut;
  }
  CHECK(cut > 0);
}
