#include "oracles.hpp"
#include "slowfast/spectral_core.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace slowfast;

namespace {

Matrix random_column_stochastic(std::mt19937_64& rng, Index r) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix m(r, r);
  for (Index c = 0; c < r; ++c) {
    for (Index i = 0; i < r; ++i) m(i, c) = u(rng);
    m.col(c) /= m.col(c).sum();
  }
  return m;
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST(StochasticMatrix, RejectsBadColumnSums) {
  Matrix m(2, 2);
  m << 0.5, 0.5, 0.6, 0.5;
  EXPECT_EQ(code_of([&] { StochasticMatrix s(m); }), ErrorCode::not_stochastic);
}

TEST(StochasticMatrix, RejectsNegativeEntries) {
  Matrix m(2, 2);
  m << 1.2, 0.5, -0.2, 0.5;
  EXPECT_EQ(code_of([&] { StochasticMatrix s(m); }), ErrorCode::not_stochastic);
}

TEST(StochasticMatrix, RejectsPeriodicAndReducible) {
  Matrix swap(2, 2);
  swap << 0, 1, 1, 0;
  EXPECT_EQ(code_of([&] { StochasticMatrix s(swap); }), ErrorCode::reducible_or_periodic);
  EXPECT_EQ(code_of([&] { StochasticMatrix s(Matrix::Identity(3, 3)); }), ErrorCode::reducible_or_periodic);
}

TEST(StochasticMatrix, AcceptsPrimitiveWithZeros) {
  Matrix m(2, 2);
  m << 0, 0.5, 1, 0.5;
  EXPECT_NO_THROW(StochasticMatrix s(m));
}

TEST(Perron, TwoPatchClosedForm) {
  const auto m = StochasticMatrix::from_migration_rates(0.2, 0.6);
  const auto pd = perron_vector(m);
  EXPECT_NEAR(pd.v(0), 0.75, 1e-15);
  EXPECT_NEAR(pd.v(1), 0.25, 1e-15);
  EXPECT_NEAR(pd.subdominant_modulus, 0.2, 1e-15);
}

TEST(Perron, MatchesDenseEigensolve) {
  std::mt19937_64 rng(7);
  for (Index r : {3, 4, 6}) {
    for (int n = 0; n < 20; ++n) {
      const Matrix m = random_column_stochastic(rng, r);
      const Vector v = perron_vector(StochasticMatrix(m)).v;
      EXPECT_LT((v - oracle::perron(m)).lpNorm<Eigen::Infinity>(), 1e-8);
      EXPECT_NEAR(v.sum(), 1.0, 1e-12);
    }
  }
}

TEST(Perron, OneByOne) {
  const auto pd = perron_vector(StochasticMatrix(Matrix::Ones(1, 1)));
  EXPECT_EQ(pd.v(0), 1.0);
}

TEST(PowerLimit, IsRankOnePerron) {
  const auto m = StochasticMatrix::from_migration_rates(0.3, 0.1);
  const Matrix lim = power_limit(m);
  const Matrix far = detail::matrix_power(m.matrix(), 4000);
  EXPECT_LT((lim - far).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RescaledPower, MatchesPlainProduct) {
  std::mt19937_64 rng(11);
  const Matrix m = random_column_stochastic(rng, 3);
  Vector s(3);
  s << 0.3, 0.6, 0.9;
  for (int k : {1, 2, 7, 64}) {
    const Matrix ref = oracle::rescaled_power(s, m, k);
    EXPECT_LT((rescaled_power(s, StochasticMatrix(m), k) - ref).cwiseAbs().maxCoeff(), 1e-12) << k;
  }
}

TEST(RescaledPower, LimitIsGeometricMeanTimesPerron) {
  std::mt19937_64 rng(12);
  const Matrix m = random_column_stochastic(rng, 3);
  Vector s(3);
  s << 0.2, 0.5, 0.95;
  const auto lim = rescaled_power_limit(s, StochasticMatrix(m));
  const Vector v = oracle::perron(m);
  EXPECT_NEAR(lim.gamma, oracle::weighted_geometric_mean(s, v), 1e-12);
  const Matrix far = oracle::rescaled_power(s, m, 1 << 14);
  EXPECT_LT(norm1(far - lim.limit_matrix), 1e-3);
}

TEST(RescaledPower, CommutedOrderSameLimit) {
  const auto m = StochasticMatrix::from_migration_rates(0.4, 0.3);
  Vector s(2);
  s << 0.3, 0.8;
  const auto lim = rescaled_power_limit(s, m);
  EXPECT_LT(norm1(rescaled_power_commuted(s, m, 4096) - lim.limit_matrix), 1e-3);
}

TEST(RescaledPower, RejectsNonpositiveSurvival) {
  const auto m = StochasticMatrix::from_migration_rates(0.4, 0.3);
  Vector s(2);
  s << 0.0, 0.8;
  EXPECT_EQ(code_of([&] { rescaled_power_limit(s, m); }), ErrorCode::nonpositive_survival);
  EXPECT_EQ(code_of([&] { rescaled_power(s, m, 3); }), ErrorCode::nonpositive_survival);
}

TEST(RescaledPower, RejectsDimensionMismatchAndBadK) {
  const auto m = StochasticMatrix::from_migration_rates(0.4, 0.3);
  Vector s(3);
  s << 0.5, 0.5, 0.5;
  EXPECT_EQ(code_of([&] { rescaled_power(s, m, 3); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { rescaled_power(s.head(2), m, 0); }), ErrorCode::invalid_argument);
}

TEST(SpectralRadius, KnownMatrices) {
  Matrix a(2, 2);
  a << 0, 2, 0.5, 0;
  EXPECT_NEAR(spectral_radius(a), 1.0, 1e-14);
  Matrix rot(2, 2);
  rot << 0, -3, 3, 0;
  EXPECT_NEAR(spectral_radius(rot), 3.0, 1e-14);
  EXPECT_EQ(code_of([&] { spectral_radius(Matrix::Zero(2, 3)); }), ErrorCode::invalid_argument);
}
