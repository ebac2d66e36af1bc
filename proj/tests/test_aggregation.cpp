#include "slowfast/aggregation.hpp"
#include "slowfast/spectral_core.hpp"

#include <gtest/gtest.h>

using namespace slowfast;

namespace {

// Affine toy on two patches: H_k(X) = gain M^k X + shift, H(X) = gain v 1^T X + shift.
TwoScaleSystem affine_system(double gain, Vector shift, double p, double q) {
  const auto m = StochasticMatrix::from_migration_rates(p, q);
  const Vector v = perron_vector(m).v;
  TwoScaleSystem sys;
  sys.state_dim = 2;
  sys.reduced_dim = 1;
  sys.complete = [=](int k, const Vector& x) { return Vector(gain * detail::matrix_power(m.matrix(), k) * x + shift); };
  sys.projection = [](const Vector& x) { return Vector::Constant(1, x.sum()); };
  sys.lift = [=](const Vector& y) { return Vector(gain * v * y(0) + shift); };
  sys.limit = [=](const Vector& x) { return Vector(gain * v * x.sum() + shift); };
  return sys;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST(Domain, PopulationOrthant) {
  EXPECT_TRUE(in_population_domain(vec2(0.0, 1.0)));
  EXPECT_FALSE(in_population_domain(vec2(-1e-9, 1.0)));
  EXPECT_FALSE(in_population_domain(vec2(std::nan(""), 1.0)));
  EXPECT_FALSE(in_population_domain(vec2(2e9, 1.0)));
}

TEST(Iterate, RecordsStartAndSteps) {
  const StateMap half = [](const Vector& x) { return Vector(0.5 * x); };
  const auto traj = iterate(half, vec2(1, 2), 3);
  ASSERT_EQ(traj.size(), 4u);
  EXPECT_EQ(traj[3], vec2(0.125, 0.25));
}

TEST(Iterate, StopsWhenLeavingDomain) {
  const StateMap down = [](const Vector& x) { return Vector(x.array() - 1.0); };
  try {
    iterate(down, vec2(1.5, 3), 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::domain_exit);
    EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos);
  }
  EXPECT_THROW(iterate(down, vec2(1, 1), -1), Error);
}

TEST(FiniteDifference, QuadraticMap) {
  const StateMap f = [](const Vector& x) { return vec2(x(0) * x(1), x(0) * x(0)); };
  const Matrix j = finite_difference_jacobian(f, vec2(2, 3));
  Matrix expected(2, 2);
  expected << 3, 2, 4, 0;
  EXPECT_LT((j - expected).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ReducedMap, ComposesLiftThenProjection) {
  const auto sys = affine_system(0.5, vec2(0.1, 0.2), 0.3, 0.3);
  const Vector y = reduced_map(sys)(Vector::Constant(1, 2.0));
  EXPECT_NEAR(y(0), 0.5 * 2.0 + 0.3, 1e-15);
}

TEST(ConvergenceTable, GapsShrinkWithK) {
  const auto sys = affine_system(0.5, vec2(0.1, 0.2), 0.2, 0.5);
  const std::vector<Vector> samples{vec2(1, 0), vec2(0.3, 0.9)};
  const auto table = convergence_table(sys, samples, 2, {1, 2, 4, 8, 16});
  ASSERT_EQ(table.size(), 5u);
  for (std::size_t i = 1; i < table.size(); ++i) EXPECT_LE(table[i].gap, table[i - 1].gap);
  EXPECT_LT(table.back().gap, 1e-4);
  EXPECT_THROW(convergence_table(sys, {}, 1, {1}), Error);
  EXPECT_THROW(convergence_table(sys, samples, 0, {1}), Error);
}

TEST(TrapSpec, Validation) {
  TrapSpec t{vec2(1, 1), 0.0, 1, 10, {1}, 1};
  EXPECT_THROW(validate(t), Error);
  t.radius = 0.1;
  t.period = 0;
  EXPECT_THROW(validate(t), Error);
  t.period = 1;
  t.sample_count = 0;
  EXPECT_THROW(validate(t), Error);
}

TEST(TrapSpec, DefaultRadius) {
  EXPECT_DOUBLE_EQ(default_radius(vec2(3, 4)), 0.25);
  EXPECT_DOUBLE_EQ(default_radius(vec2(0, 0)), 0.05);
}

TEST(SphereMesh, UnitDirections) {
  for (Index n : {1, 2, 3, 6}) {
    const auto dirs = sphere_mesh(n, 25);
    ASSERT_EQ(dirs.size(), 25u);
    for (const auto& d : dirs) EXPECT_NEAR(d.norm(), 1.0, 1e-12);
  }
}

TEST(Trapping, ContractionTrapsForLargeK) {
  // Fixed point of H: total 2 * 0.3 = 0.6, X* = 0.5 v 0.6 + shift.
  const auto sys = affine_system(0.5, vec2(0.1, 0.2), 0.3, 0.3);
  const Vector center = vec2(0.25, 0.35);
  ASSERT_LT((sys.limit(center) - center).norm(), 1e-12);
  const TrapSpec trap{center, default_radius(center), 1, 100, {1, 50}, 3};
  const auto verdicts = trapping_check(sys, trap);
  ASSERT_EQ(verdicts.size(), 2u);
  EXPECT_TRUE(verdicts[1].trapped);
  EXPECT_LT(verdicts[1].worst_ratio, 1.0);
  EXPECT_EQ(verdicts[1].evaluated + verdicts[1].skipped, 100u);
}

TEST(Trapping, RejectsCenterThatIsNotPeriodic) {
  const auto sys = affine_system(0.5, vec2(0.1, 0.2), 0.3, 0.3);
  const TrapSpec trap{vec2(1, 1), 0.05, 1, 10, {1}, 3};
  try {
    trapping_check(sys, trap);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_center);
  }
}

TEST(Attraction, EntersAndStays) {
  const auto sys = affine_system(0.5, vec2(0.1, 0.2), 0.3, 0.3);
  const Vector center = vec2(0.25, 0.35);
  const TrapSpec trap{center, default_radius(center), 1, 10, {50}, 3};
  const auto v = attraction_check(sys, trap, vec2(3, 0), {200});
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(v[0].enters_and_stays);
  EXPECT_GT(v[0].entry_n, 0);
}

TEST(Instability, ExpandingFixedPointEscapes) {
  // H(X) = 2 v 1^T X - 1 with v = (1/2, 1/2): X* = (1, 1), multiplier 2.
  const auto sys = affine_system(2.0, vec2(-1, -1), 0.4, 0.4);
  const Vector center = vec2(1, 1);
  ASSERT_LT((sys.limit(center) - center).norm(), 1e-12);
  const TrapSpec trap{center, 0.01, 1, 50, {20}, 3};
  const auto v = instability_check(sys, trap);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(v[0].escapes_boundary);
  EXPECT_NEAR(v[0].expanding_modulus, 2.0, 1e-6);
}

TEST(Instability, ContractingFixedPointDoesNotEscape) {
  const auto sys = affine_system(0.5, vec2(0.1, 0.2), 0.3, 0.3);
  const Vector center = vec2(0.25, 0.35);
  const auto v = instability_check(sys, {center, 0.01, 1, 50, {50}, 3});
  EXPECT_FALSE(v[0].escapes_boundary);
}
