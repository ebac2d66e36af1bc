#pragma once

// q-stage, r-patch metapopulation with fast dispersal and slow demography.
// States are stage-major: X = (X_1, ..., X_q), X_i = (x_i^1, ..., x_i^r).

#include "slowfast/aggregation.hpp"
#include "slowfast/spectral_core.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace slowfast {

struct MetapopModel {
  Index stages = 0;
  Index patches = 0;
  /// M_i(Y): primitive column-stochastic patch transfer for stage i.
  std::function<StochasticMatrix(Index stage, const Vector& y)> dispersal;
  /// s_j^a(Y) at index j * patches + a.
  std::function<Vector(const Vector& y)> survival;
  /// D(X), block matrix with diagonal blocks D_ij = diag(d_ij^a(X)).
  std::function<Matrix(const Vector& x)> demography;

  Index state_dim() const noexcept { return stages * patches; }
};

/// U, the q x qr stage-total operator.
inline Matrix aggregation_operator(Index stages, Index patches) {
  Matrix u = Matrix::Zero(stages, stages * patches);
  for (Index i = 0; i < stages; ++i) u.block(i, i * patches, 1, patches).setOnes();
  return u;
}

inline Vector aggregate(const Vector& x, Index stages, Index patches) {
  if (x.size() != stages * patches) throw Error(ErrorCode::invalid_argument, "state size must be q*r");
  Vector y(stages);
  for (Index i = 0; i < stages; ++i) y(i) = x.segment(i * patches, patches).sum();
  return y;
}

inline Vector aggregate(const MetapopModel& model, const Vector& x) {
  return aggregate(x, model.stages, model.patches);
}

namespace detail {

inline void require_state(const MetapopModel& model, const Vector& x) {
  if (x.size() != model.state_dim()) throw Error(ErrorCode::invalid_argument, "state size must be q*r");
}

inline void require_global(const MetapopModel& model, const Vector& y) {
  if (y.size() != model.stages) throw Error(ErrorCode::invalid_argument, "global state size must be q");
}

inline Vector checked_survival(const MetapopModel& model, const Vector& y) {
  Vector s = model.survival(y);
  if (s.size() != model.state_dim()) throw Error(ErrorCode::invalid_argument, "survival size must be q*r");
  if (!s.allFinite() || s.minCoeff() <= 0.0) {
    throw Error(ErrorCode::nonpositive_survival, "survival rates must be strictly positive");
  }
  return s;
}

inline Vector finite_or_throw(Vector x, const char* where) {
  if (!x.allFinite()) throw Error(ErrorCode::domain_exit, std::string("non-finite state in ") + where);
  return x;
}

}  // namespace detail

/// D~(X): each entry d_ij^a(X) divided by s_j^a(UX). Zero entries stay zero.
inline Matrix demography_tilde(const MetapopModel& model, const Vector& x) {
  detail::require_state(model, x);
  Matrix d = model.demography(x);
  const Vector s = detail::checked_survival(model, aggregate(model, x));
  for (Index c = 0; c < d.cols(); ++c) {
    for (Index r = 0; r < d.rows(); ++r) {
      if (d(r, c) != 0.0) d(r, c) /= s(c);
    }
  }
  return d;
}

/// M(UX)^k X by k successive dispersal events.
inline Vector dispersal_power(const MetapopModel& model, const Vector& x, int k) {
  detail::require_state(model, x);
  if (k < 1) throw Error(ErrorCode::invalid_argument, "k must be >= 1");
  const Vector y = aggregate(model, x);
  const Index r = model.patches;
  Vector z = x;
  for (Index i = 0; i < model.stages; ++i) {
    const Matrix m = model.dispersal(i, y).matrix();
    Vector zi = z.segment(i * r, r);
    for (int step = 0; step < k; ++step) zi = m * zi;
    z.segment(i * r, r) = zi;
  }
  return z;
}

/// (S_k(UX) M(UX))^k X with S_k = S^{1/k}.
inline Vector rescaled_dispersal_power(const MetapopModel& model, const Vector& x, int k) {
  detail::require_state(model, x);
  if (k < 1) throw Error(ErrorCode::invalid_argument, "k must be >= 1");
  const Vector y = aggregate(model, x);
  const Vector s = detail::checked_survival(model, y);
  const Vector root = (s.array().log() / static_cast<double>(k)).exp().matrix();
  const Index r = model.patches;
  Vector z = x;
  for (Index i = 0; i < model.stages; ++i) {
    const Matrix a = root.segment(i * r, r).asDiagonal() * model.dispersal(i, y).matrix();
    Vector zi = z.segment(i * r, r);
    for (int step = 0; step < k; ++step) zi = a * zi;
    z.segment(i * r, r) = zi;
  }
  return z;
}

inline Vector complete_step_slow(const MetapopModel& model, const Vector& x, int k) {
  const Vector z = dispersal_power(model, x, k);
  return detail::finite_or_throw(model.demography(z) * z, "complete_step_slow");
}

inline Vector complete_step_rescaled(const MetapopModel& model, const Vector& x, int k) {
  const Vector z = rescaled_dispersal_power(model, x, k);
  return detail::finite_or_throw(demography_tilde(model, z) * z, "complete_step_rescaled");
}

/// V(Y) = diag(V_1(Y), ..., V_q(Y)), qr x q.
inline Matrix perron_lift(const MetapopModel& model, const Vector& y) {
  detail::require_global(model, y);
  const Index r = model.patches;
  Matrix v = Matrix::Zero(model.state_dim(), model.stages);
  for (Index i = 0; i < model.stages; ++i) v.block(i * r, i, r, 1) = perron_vector(model.dispersal(i, y)).v;
  return v;
}

/// V~(Y) = diag(gamma_i(Y) V_i(Y)) with gamma_i = exp(sum_a log(s_i^a) v_i^a).
inline Matrix rescaled_perron_lift(const MetapopModel& model, const Vector& y) {
  detail::require_global(model, y);
  const Vector s = detail::checked_survival(model, y);
  const Index r = model.patches;
  Matrix v = Matrix::Zero(model.state_dim(), model.stages);
  for (Index i = 0; i < model.stages; ++i) {
    const RescaledLimit lim = rescaled_power_limit(s.segment(i * r, r), model.dispersal(i, y));
    v.block(i * r, i, r, 1) = lim.gamma * lim.v;
  }
  return v;
}

/// T(Y) = D(V(Y)Y) V(Y)Y.
inline Vector lift_slow(const MetapopModel& model, const Vector& y) {
  const Vector w = perron_lift(model, y) * y;
  return model.demography(w) * w;
}

/// T~(Y) = D~(V~(Y)Y) V~(Y)Y.
inline Vector lift_rescaled(const MetapopModel& model, const Vector& y) {
  const Vector w = rescaled_perron_lift(model, y) * y;
  return demography_tilde(model, w) * w;
}

inline Vector reduced_step_slow(const MetapopModel& model, const Vector& y) {
  return detail::finite_or_throw(aggregate(model, lift_slow(model, y)), "reduced_step_slow");
}

inline Vector reduced_step_rescaled(const MetapopModel& model, const Vector& y) {
  return detail::finite_or_throw(aggregate(model, lift_rescaled(model, y)), "reduced_step_rescaled");
}

inline Vector complete_step(const MetapopModel& model, Variant variant, const Vector& x, int k) {
  return variant == Variant::slow ? complete_step_slow(model, x, k) : complete_step_rescaled(model, x, k);
}

inline Vector reduced_step(const MetapopModel& model, Variant variant, const Vector& y) {
  return variant == Variant::slow ? reduced_step_slow(model, y) : reduced_step_rescaled(model, y);
}

inline Vector lift(const MetapopModel& model, Variant variant, const Vector& y) {
  return variant == Variant::slow ? lift_slow(model, y) : lift_rescaled(model, y);
}

/// The metapopulation as a two-scale system: H_k from the complete step,
/// G = U, T the Perron (or survival-weighted Perron) lift followed by
/// demography, and H = T o G.
inline TwoScaleSystem two_scale_system(MetapopModel model, Variant variant) {
  TwoScaleSystem sys;
  sys.state_dim = model.state_dim();
  sys.reduced_dim = model.stages;
  sys.complete = [model, variant](int k, const Vector& x) { return complete_step(model, variant, x, k); };
  sys.projection = [model](const Vector& x) { return aggregate(model, x); };
  sys.lift = [model, variant](const Vector& y) { return lift(model, variant, y); };
  sys.limit = [model, variant](const Vector& x) { return lift(model, variant, aggregate(model, x)); };
  return sys;
}

}  // namespace slowfast
