#pragma once

// Independent reference computations. Nothing here calls into the library's
// numerical routines; each quantity is rebuilt from the model definition.

#include "slowfast/threestage.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numeric>

namespace oracle {

using slowfast::Matrix;
using slowfast::Vector;
using slowfast::threestage::ThreeStageParams;

// Exact rationals, enough for the closed-form coefficients of the figures.
struct Frac {
  long long num = 0;
  long long den = 1;

  Frac(long long n = 0, long long d = 1) : num(n), den(d) {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

inline Frac operator+(Frac a, Frac b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
inline Frac operator-(Frac a, Frac b) { return {a.num * b.den - b.num * a.den, a.den * b.den}; }
inline Frac operator*(Frac a, Frac b) { return {a.num * b.num, a.den * b.den}; }
inline bool operator==(Frac a, Frac b) { return a.num == b.num && a.den == b.den; }

/// Isolated patch: -(1 - s2 s3) s1 c + s1 s2 s3 (1 - s3) d.
inline Frac local_a_minus(Frac s1, Frac s2, Frac s3, Frac c, Frac d) {
  return Frac(0) - (Frac(1) - s2 * s3) * s1 * c + s1 * s2 * s3 * (Frac(1) - s3) * d;
}

/// Two homogeneous patches, slow survival, Perron fractions v2, v3 in patch 1.
/// h1'(0) = -c (v2^2 + (1-v2)^2), h2'(0) = -d (v3 v2 + (1-v3)(1-v2)).
inline Frac global_a_minus(Frac s1, Frac s2, Frac s3, Frac c, Frac d, Frac v2, Frac v3) {
  const Frac u2 = Frac(1) - v2;
  const Frac u3 = Frac(1) - v3;
  const Frac h1 = Frac(0) - c * (v2 * v2 + u2 * u2);
  const Frac h2 = Frac(0) - d * (v3 * v2 + u3 * u2);
  const Frac cw = (Frac(1) - s2 * s3) * s1 * h1;
  const Frac cb = s1 * s2 * s3 * (Frac(1) - s3) * h2;
  return cw - cb;
}

/// Probability eigenvector for the eigenvalue closest to 1, by dense eigensolve.
inline Vector perron(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m, true);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < m.rows(); ++i) {
    if (std::abs(es.eigenvalues()(i) - 1.0) < std::abs(es.eigenvalues()(best) - 1.0)) best = i;
  }
  Vector v = es.eigenvectors().col(best).real().cwiseAbs();
  return v / v.sum();
}

/// (S^{1/k} M)^k by k plain multiplications.
inline Matrix rescaled_power(const Vector& s, const Matrix& m, int k) {
  Vector root(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) root(i) = std::pow(s(i), 1.0 / k);
  const Matrix step = root.asDiagonal() * m;
  Matrix out = Matrix::Identity(m.rows(), m.cols());
  for (int i = 0; i < k; ++i) out = step * out;
  return out;
}

inline double weighted_geometric_mean(const Vector& s, const Vector& v) {
  double g = 1.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) g *= std::pow(s(i), v(i));
  return g;
}

// ---------------------------------------------------------------------------
// Dense three-stage, two-patch model in index form.

inline Matrix stage_dispersal(const ThreeStageParams& p, int stage) {
  const double v = p.perron_fraction[stage];
  const double leave1 = p.mixing[stage] * (1.0 - v);
  const double leave2 = p.mixing[stage] * v;
  Matrix m(2, 2);
  m << 1.0 - leave1, leave2, leave1, 1.0 - leave2;
  return m;
}

inline Matrix block_dispersal(const ThreeStageParams& p) {
  Matrix m = Matrix::Zero(6, 6);
  for (int i = 0; i < 3; ++i) m.block(2 * i, 2 * i, 2, 2) = stage_dispersal(p, i);
  return m;
}

/// One demographic event per patch; survivals optional.
inline Vector demography(const ThreeStageParams& p, const Vector& x, bool with_survival) {
  Vector out(6);
  for (int a = 0; a < 2; ++a) {
    const double j = x(a), act = x(2 + a), inact = x(4 + a);
    const double s1 = with_survival ? p.survival[0][a] : 1.0;
    const double s2 = with_survival ? p.survival[1][a] : 1.0;
    const double s3 = with_survival ? p.survival[2][a] : 1.0;
    const double f = p.fertility[a] / (1.0 + p.fertility_crowding[a] * act);
    const double g = 1.0 / (1.0 + p.activation_crowding[a] * act);
    out(a) = f * s2 * act;
    out(2 + a) = s1 * j + g * s3 * inact;
    out(4 + a) = s2 * act + (1.0 - g) * s3 * inact;
  }
  return out;
}

inline Vector complete_step(const ThreeStageParams& p, bool rescaled, const Vector& x, int k) {
  Matrix step = block_dispersal(p);
  if (rescaled) {
    Vector root(6);
    for (int i = 0; i < 3; ++i) {
      for (int a = 0; a < 2; ++a) root(2 * i + a) = std::pow(p.survival[i][a], 1.0 / k);
    }
    step = root.asDiagonal() * step;
  }
  Vector z = x;
  for (int i = 0; i < k; ++i) z = step * z;
  return demography(p, z, !rescaled);
}

inline Vector totals(const Vector& x) {
  Vector y(3);
  for (int i = 0; i < 3; ++i) y(i) = x(2 * i) + x(2 * i + 1);
  return y;
}

/// Reduced step through the lift: distribute each stage total by its Perron
/// fractions (times the geometric-mean survival when rescaled), then one
/// demographic event, then totals.
inline Vector reduced_step(const ThreeStageParams& p, bool rescaled, const Vector& y) {
  Vector x(6);
  for (int i = 0; i < 3; ++i) {
    Vector v(2), s(2);
    v << p.perron_fraction[i], 1.0 - p.perron_fraction[i];
    s << p.survival[i][0], p.survival[i][1];
    const double scale = rescaled ? weighted_geometric_mean(s, v) : 1.0;
    x(2 * i) = scale * v(0) * y(i);
    x(2 * i + 1) = scale * v(1) * y(i);
  }
  return totals(demography(p, x, !rescaled));
}

/// Central difference of a scalar function.
template <typename F>
double derivative(F&& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double synchrony_ratio_sup() { return (1.0 + std::sqrt(2.0)) / 2.0; }

}  // namespace oracle
