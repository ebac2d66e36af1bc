#pragma once

// Perron-Frobenius machinery for column-stochastic dispersal matrices:
// primitivity, Perron vectors, limits of powers, and the limit of powers
// when survival is spread over the k fast steps.

#include "slowfast/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace slowfast {

enum class Primitivity { ok, not_stochastic, reducible_or_periodic };

inline std::string_view to_string(Primitivity p) {
  switch (p) {
    case Primitivity::ok: return "ok";
    case Primitivity::not_stochastic: return "not_stochastic";
    case Primitivity::reducible_or_periodic: return "reducible_or_periodic";
  }
  return "unknown";
}

inline constexpr double kStochasticTolerance = 1e-12;

namespace detail {

// Boolean product of two zero patterns.
inline Eigen::MatrixXi pattern_product(const Eigen::MatrixXi& a, const Eigen::MatrixXi& b) {
  Eigen::MatrixXi c = a * b;
  return c.unaryExpr([](int x) { return x > 0 ? 1 : 0; });
}

}  // namespace detail

/// Primitive column-stochastic test. A matrix is primitive iff its power
/// (r-1)^2 + 1 is entrywise positive, so the check is an exact finite test on
/// the zero pattern.
inline Primitivity is_primitive_stochastic(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorCode::invalid_argument, "matrix must be square and nonempty");
  }
  if (!m.allFinite()) throw Error(ErrorCode::invalid_argument, "matrix has non-finite entries");

  for (Index j = 0; j < m.cols(); ++j) {
    if (m.col(j).minCoeff() < 0.0 || m.col(j).maxCoeff() > 1.0) return Primitivity::not_stochastic;
    if (std::abs(m.col(j).sum() - 1.0) > kStochasticTolerance) return Primitivity::not_stochastic;
  }

  const Index r = m.rows();
  Eigen::MatrixXi base = m.unaryExpr([](double x) { return x > 0.0 ? 1 : 0; }).cast<int>();
  long exponent = (r - 1) * (r - 1) + 1;
  Eigen::MatrixXi result = Eigen::MatrixXi::Identity(r, r);
  while (exponent > 0) {
    if (exponent & 1) result = detail::pattern_product(result, base);
    base = detail::pattern_product(base, base);
    exponent >>= 1;
  }
  return result.minCoeff() > 0 ? Primitivity::ok : Primitivity::reducible_or_periodic;
}

/// A validated primitive column-stochastic matrix.
class StochasticMatrix {
 public:
  explicit StochasticMatrix(Matrix m) : m_(std::move(m)) {
    switch (is_primitive_stochastic(m_)) {
      case Primitivity::ok: break;
      case Primitivity::not_stochastic:
        throw Error(ErrorCode::not_stochastic, "column sums must equal 1 and entries lie in [0,1]");
      case Primitivity::reducible_or_periodic:
        throw Error(ErrorCode::reducible_or_periodic, "Wielandt power has a zero entry");
    }
  }

  /// Two-patch matrix [[1-p, q], [p, 1-q]] from migration rates p (1 -> 2)
  /// and q (2 -> 1).
  static StochasticMatrix from_migration_rates(double p, double q) {
    Matrix m(2, 2);
    m << 1.0 - p, q, p, 1.0 - q;
    return StochasticMatrix(std::move(m));
  }

  const Matrix& matrix() const noexcept { return m_; }
  Index dim() const noexcept { return m_.rows(); }

 private:
  Matrix m_;
};

struct PerronData {
  Vector v;                    // probability vector, Mv = v
  double subdominant_modulus;  // second largest eigenvalue modulus
};

struct PowerIterationOptions {
  double tolerance = 1e-12;
  long max_iterations = 100000;
};

inline PerronData perron_vector(const StochasticMatrix& sm, PowerIterationOptions opts = {}) {
  const Matrix& m = sm.matrix();
  const Index r = sm.dim();
  if (r == 1) return {Vector::Ones(1), 0.0};

  if (r == 2) {
    // Closed form: v = (q, p) / (p + q).
    const double p = m(1, 0);
    const double q = m(0, 1);
    Vector v(2);
    v << q / (p + q), p / (p + q);
    return {v, std::abs(1.0 - p - q)};
  }

  Vector v = Vector::Constant(r, 1.0 / static_cast<double>(r));
  bool converged = false;
  for (long it = 0; it < opts.max_iterations; ++it) {
    Vector next = m * v;
    next /= next.sum();
    const double diff = (next - v).lpNorm<1>();
    v = std::move(next);
    if (diff < opts.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(ErrorCode::non_convergence, "power iteration did not reach tolerance");
  }

  Eigen::EigenSolver<Matrix> es(m, false);
  std::vector<double> moduli;
  for (Index i = 0; i < r; ++i) moduli.push_back(std::abs(es.eigenvalues()(i)));
  std::sort(moduli.begin(), moduli.end(), std::greater<>());
  return {v, moduli[1]};
}

/// lim_k M^k = v 1.
inline Matrix power_limit(const StochasticMatrix& m) {
  const Vector v = perron_vector(m).v;
  return v * Vector::Ones(m.dim()).transpose();
}

namespace detail {

inline Vector kth_root(const Vector& survival, int k) {
  if (k < 1) throw Error(ErrorCode::invalid_argument, "k must be >= 1");
  if (survival.size() == 0 || survival.minCoeff() <= 0.0 || !survival.allFinite()) {
    throw Error(ErrorCode::nonpositive_survival, "survival entries must be strictly positive");
  }
  return (survival.array().log() / static_cast<double>(k)).exp().matrix();
}

inline Matrix matrix_power(Matrix base, long exponent) {
  Matrix result = Matrix::Identity(base.rows(), base.cols());
  while (exponent > 0) {
    if (exponent & 1) result = result * base;
    exponent >>= 1;
    if (exponent > 0) base = base * base;
  }
  return result;
}

inline void check_dims(const Vector& survival, const StochasticMatrix& m) {
  if (survival.size() != m.dim()) {
    throw Error(ErrorCode::invalid_argument, "survival length must equal matrix dimension");
  }
}

}  // namespace detail

/// (S^{1/k} M)^k with S = diag(survival); S^{1/k} has entries exp(log s / k).
inline Matrix rescaled_power(const Vector& survival, const StochasticMatrix& m, int k) {
  detail::check_dims(survival, m);
  if (k == 1) {
    if (survival.minCoeff() <= 0.0) {
      throw Error(ErrorCode::nonpositive_survival, "survival entries must be strictly positive");
    }
    return survival.asDiagonal() * m.matrix();
  }
  const Vector root = detail::kth_root(survival, k);
  return detail::matrix_power(root.asDiagonal() * m.matrix(), k);
}

/// (M S^{1/k})^k, the commuted ordering.
inline Matrix rescaled_power_commuted(const Vector& survival, const StochasticMatrix& m, int k) {
  detail::check_dims(survival, m);
  const Vector root = detail::kth_root(survival, k);
  return detail::matrix_power(m.matrix() * root.asDiagonal(), k);
}

struct RescaledLimit {
  double gamma;
  Vector v;
  Matrix limit_matrix;  // gamma * v * 1
};

/// Limit of (S^{1/k} M)^k for diagonal S: gamma v 1 with
/// gamma = exp(sum_a log(s_a) v_a), the v-weighted geometric mean of s.
inline RescaledLimit rescaled_power_limit(const Vector& survival, const StochasticMatrix& m) {
  detail::check_dims(survival, m);
  if (survival.minCoeff() <= 0.0 || !survival.allFinite()) {
    throw Error(ErrorCode::nonpositive_survival, "survival entries must be strictly positive");
  }
  const Vector v = perron_vector(m).v;
  const double gamma = std::exp(survival.array().log().matrix().dot(v));
  return {gamma, v, gamma * v * Vector::Ones(m.dim()).transpose()};
}

inline double spectral_radius(const Matrix& a) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::invalid_argument, "matrix must be square");
  if (a.size() == 0) return 0.0;
  if (!a.allFinite()) throw Error(ErrorCode::invalid_argument, "matrix has non-finite entries");
  Eigen::EigenSolver<Matrix> es(a, false);
  if (es.info() != Eigen::Success) {
    // Best estimate: Gelfand's formula on a moderate power.
    const Matrix p = detail::matrix_power(a / std::max(norm1(a), 1e-300), 64);
    const double estimate = std::pow(norm1(p), 1.0 / 64.0) * norm1(a);
    std::ostringstream os;
    os << "eigenvalue iteration failed; best estimate " << estimate;
    throw Error(ErrorCode::non_convergence, os.str());
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace slowfast
