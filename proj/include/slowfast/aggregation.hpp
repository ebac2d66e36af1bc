#pragma once

// Generic two-time-scale framework: a complete family X -> H_k(X), its
// limit H = T o G, the reduced map G o T, and numerical harnesses for the
// convergence, trapping, attraction and instability statements linking the
// complete and reduced systems.

#include "slowfast/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

namespace slowfast {

using StateMap = std::function<Vector(const Vector&)>;
using MapFamily = std::function<Vector(int k, const Vector&)>;
using DomainPredicate = std::function<bool(const Vector&)>;

inline constexpr double kDomainBound = 1e9;

/// Admissible population states: finite, nonnegative, bounded by 1e9.
inline bool in_population_domain(const Vector& x) {
  return x.allFinite() && (x.size() == 0 || (x.minCoeff() >= 0.0 && x.maxCoeff() <= kDomainBound));
}

inline bool in_finite_domain(const Vector& x) { return x.allFinite(); }

struct TwoScaleSystem {
  Index state_dim = 0;
  Index reduced_dim = 0;
  MapFamily complete;     // (k, X) -> H_k(X)
  StateMap limit;         // H
  StateMap projection;    // G
  StateMap lift;          // T
  DomainPredicate domain = in_population_domain;

  StateMap complete_at(int k) const {
    return [f = complete, k](const Vector& x) { return f(k, x); };
  }
};

/// Y -> G(T(Y)).
inline StateMap reduced_map(const TwoScaleSystem& sys) {
  return [g = sys.projection, t = sys.lift](const Vector& y) { return g(t(y)); };
}

/// m-fold composition, without domain checks.
inline Vector compose_power(const StateMap& f, Vector x, int m) {
  for (int i = 0; i < m; ++i) x = f(x);
  return x;
}

inline std::vector<Vector> iterate(const StateMap& map, const Vector& x0, long steps,
                                   const DomainPredicate& domain = in_population_domain) {
  if (steps < 0) throw Error(ErrorCode::invalid_argument, "steps must be nonnegative");
  if (!domain(x0)) throw Error(ErrorCode::domain_exit, "initial state outside admissible domain");
  std::vector<Vector> traj;
  traj.reserve(static_cast<std::size_t>(steps) + 1);
  traj.push_back(x0);
  for (long t = 0; t < steps; ++t) {
    Vector next = map(traj.back());
    if (!domain(next)) {
      throw Error(ErrorCode::domain_exit, "state left admissible domain at step " + std::to_string(t + 1));
    }
    traj.push_back(std::move(next));
  }
  return traj;
}

/// Central-difference Jacobian, step 1e-6 * max(1, |x_j|).
inline Matrix finite_difference_jacobian(const StateMap& f, const Vector& x) {
  const Vector fx = f(x);
  Matrix jac(fx.size(), x.size());
  for (Index j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(j)));
    Vector xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

// ---------------------------------------------------------------------------
// Uniform convergence table

struct ConvergenceRow {
  int k;
  double gap;              // max over samples of ||H_k^m(X) - H^m(X)||_2
  std::size_t failed = 0;  // samples whose evaluation left the finite range
};

inline std::vector<ConvergenceRow> convergence_table(const TwoScaleSystem& sys,
                                                     const std::vector<Vector>& samples, int m,
                                                     const std::vector<int>& k_values) {
  if (samples.empty()) throw Error(ErrorCode::invalid_argument, "samples must be nonempty");
  if (m < 1) throw Error(ErrorCode::invalid_argument, "m must be >= 1");
  std::vector<Vector> limit_images;
  limit_images.reserve(samples.size());
  for (const auto& x : samples) limit_images.push_back(compose_power(sys.limit, x, m));

  std::vector<ConvergenceRow> table;
  for (int k : k_values) {
    ConvergenceRow row{k, 0.0, 0};
    const StateMap hk = sys.complete_at(k);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Vector img = compose_power(hk, samples[i], m);
      if (!img.allFinite() || !limit_images[i].allFinite()) {
        ++row.failed;
        continue;
      }
      row.gap = std::max(row.gap, (img - limit_images[i]).norm());
    }
    table.push_back(row);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Ball sampling

struct TrapSpec {
  Vector center;
  double radius = 0.0;
  int period = 1;
  int sample_count = 200;
  std::vector<int> k_values;
  std::uint64_t seed = 42;
};

inline void validate(const TrapSpec& trap) {
  if (!(trap.radius > 0.0)) throw Error(ErrorCode::invalid_argument, "trap radius must be positive");
  if (trap.period < 1) throw Error(ErrorCode::invalid_argument, "trap period must be >= 1");
  if (trap.sample_count < 1) throw Error(ErrorCode::invalid_argument, "sample_count must be >= 1");
  if (trap.center.size() == 0) throw Error(ErrorCode::invalid_argument, "trap center is empty");
}

/// Default radius: 5% of ||X*||, or 0.05 when X* = 0.
inline double default_radius(const Vector& center) {
  const double n = center.norm();
  return n > 0.0 ? 0.05 * n : 0.05;
}

/// Deterministic quasi-uniform unit directions in R^n. The golden-angle
/// spiral in 2D and 3D; above that, an additive golden-ratio sequence pushed
/// through Box-Muller.
inline std::vector<Vector> sphere_mesh(Index n, int count) {
  std::vector<Vector> dirs;
  if (count <= 0) return dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  if (n == 1) {
    for (int i = 0; i < count; ++i) dirs.push_back(Vector::Constant(1, i % 2 == 0 ? 1.0 : -1.0));
    return dirs;
  }
  if (n == 2) {
    for (int i = 0; i < count; ++i) {
      const double a = 2.0 * std::numbers::pi * i / golden;
      Vector d(2);
      d << std::cos(a), std::sin(a);
      dirs.push_back(d);
    }
    return dirs;
  }
  if (n == 3) {
    for (int i = 0; i < count; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / count;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double a = 2.0 * std::numbers::pi * i / golden;
      Vector d(3);
      d << rho * std::cos(a), rho * std::sin(a), z;
      dirs.push_back(d);
    }
    return dirs;
  }
  // Generalized golden ratio for dimension 2n: root of x^(2n+1) = x + 1.
  const Index dim = 2 * n;
  double phi = 2.0;
  for (int i = 0; i < 64; ++i) phi = std::pow(1.0 + phi, 1.0 / static_cast<double>(dim + 1));
  Vector alpha(dim);
  for (Index j = 0; j < dim; ++j) alpha(j) = std::fmod(std::pow(1.0 / phi, static_cast<double>(j + 1)), 1.0);
  for (int i = 0; i < count; ++i) {
    Vector d(n);
    for (Index j = 0; j < n; ++j) {
      double u1 = std::fmod(0.5 + alpha(2 * j) * (i + 1), 1.0);
      double u2 = std::fmod(0.5 + alpha(2 * j + 1) * (i + 1), 1.0);
      u1 = std::clamp(u1, 1e-12, 1.0 - 1e-12);
      d(j) = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    const double norm = d.norm();
    if (norm == 0.0) d(0) = 1.0;
    dirs.push_back(d / std::max(norm, 1e-300));
  }
  return dirs;
}

/// Sample count points of the closed ball: ceil(count/2) on the sphere from
/// the deterministic mesh, the rest uniform in the interior from a seeded
/// generator.
inline std::vector<Vector> sample_ball(const Vector& center, double radius, int count,
                                       std::uint64_t seed) {
  const Index n = center.size();
  const int on_sphere = (count + 1) / 2;
  std::vector<Vector> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (const auto& d : sphere_mesh(n, on_sphere)) pts.push_back(center + radius * d);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = on_sphere; i < count; ++i) {
    Vector d(n);
    for (Index j = 0; j < n; ++j) d(j) = normal(rng);
    const double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(n));
    pts.push_back(center + r * d / d.norm());
  }
  return pts;
}

namespace detail {

inline void check_center(const TwoScaleSystem& sys, const TrapSpec& trap) {
  const Vector img = compose_power(sys.limit, trap.center, trap.period);
  if (!img.allFinite() || (img - trap.center).norm() > trap.radius / 10.0) {
    throw Error(ErrorCode::invalid_center, "H^m(X*) deviates from X* by more than radius/10");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trapping region check

struct TrapVerdict {
  int k;
  bool trapped;
  std::optional<Vector> witness;  // a sample whose image left the open ball
  double worst_ratio;             // max ||H_k^m(X) - X*|| / radius
  std::size_t evaluated;
  std::size_t skipped;            // samples outside the admissible domain
};

/// For each k, the closed ball is reported trapped iff every sampled point
/// inside the admissible domain is mapped by H_k^m into the open ball.
inline std::vector<TrapVerdict> trapping_check(const TwoScaleSystem& sys, const TrapSpec& trap) {
  validate(trap);
  detail::check_center(sys, trap);
  const auto samples = sample_ball(trap.center, trap.radius, trap.sample_count, trap.seed);

  std::vector<TrapVerdict> out;
  for (int k : trap.k_values) {
    TrapVerdict v{k, true, std::nullopt, 0.0, 0, 0};
    const StateMap hk = sys.complete_at(k);
    for (const auto& x : samples) {
      if (!sys.domain(x)) {
        ++v.skipped;
        continue;
      }
      ++v.evaluated;
      const Vector img = compose_power(hk, x, trap.period);
      const double dist = img.allFinite() ? (img - trap.center).norm()
                                          : std::numeric_limits<double>::infinity();
      v.worst_ratio = std::max(v.worst_ratio, dist / trap.radius);
      if (!(dist < trap.radius) && v.trapped) {
        v.trapped = false;
        v.witness = x;
      }
    }
    if (v.evaluated == 0) v.trapped = false;
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attraction check

struct AttractionVerdict {
  int k;
  bool enters_and_stays;
  long entry_n;             // smallest n with H_k^{mn+1}(X0) inside from then on
  double closest_approach;  // min over checked iterates of ||X - X*||
};

struct AttractionOptions {
  long horizon = 100000;  // complete-map steps
};

inline std::vector<AttractionVerdict> attraction_check(const TwoScaleSystem& sys, const TrapSpec& trap,
                                                       const Vector& x0, AttractionOptions opts = {}) {
  validate(trap);
  std::vector<AttractionVerdict> out;
  for (int k : trap.k_values) {
    const StateMap hk = sys.complete_at(k);
    Vector x = hk(x0);  // H_k^{m*0+1}(X0)
    long steps = 1;
    long n = 0;
    long last_outside = -1;
    double closest = std::numeric_limits<double>::infinity();
    bool finite = true;
    while (true) {
      if (!x.allFinite()) {
        finite = false;
        break;
      }
      const double dist = (x - trap.center).norm();
      closest = std::min(closest, dist);
      if (!(dist < trap.radius)) last_outside = n;
      if (steps + trap.period > opts.horizon) break;
      x = compose_power(hk, x, trap.period);
      steps += trap.period;
      ++n;
    }
    const bool ok = finite && last_outside < n;
    out.push_back({k, ok, ok ? last_outside + 1 : -1, closest});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Instability check

struct InstabilityVerdict {
  int k;
  bool escapes_boundary;
  std::optional<Vector> witness;   // eigendirection sample that stayed in the closed ball
  double expanding_modulus;        // |lambda| of the chosen eigenvalue of DH^m(X*)
  double random_escape_fraction;   // share of random sphere points that escaped
};

/// Unit vector along the eigendirection of the largest-modulus eigenvalue
/// of a Jacobian, and that modulus.
inline std::pair<Vector, double> dominant_direction(const Matrix& jac) {
  Eigen::EigenSolver<Matrix> es(jac, true);
  Index best = 0;
  for (Index i = 1; i < jac.rows(); ++i) {
    if (std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(best))) best = i;
  }
  Vector u = es.eigenvectors().col(best).real();
  if (u.norm() < 1e-12) u = es.eigenvectors().col(best).imag();
  return {u / u.norm(), std::abs(es.eigenvalues()(best))};
}

inline std::vector<InstabilityVerdict> instability_check(const TwoScaleSystem& sys, const TrapSpec& trap) {
  validate(trap);
  detail::check_center(sys, trap);
  const StateMap hm = [h = sys.limit, m = trap.period](const Vector& x) { return compose_power(h, x, m); };
  const auto [u, modulus] = dominant_direction(finite_difference_jacobian(hm, trap.center));

  std::vector<Vector> directional;
  for (double sign : {1.0, -1.0}) {
    Vector x = trap.center + sign * trap.radius * u;
    if (sys.domain(x)) directional.push_back(std::move(x));
  }
  std::vector<Vector> random_points;
  for (const auto& d : sphere_mesh(trap.center.size(), trap.sample_count)) {
    Vector x = trap.center + trap.radius * d;
    if (sys.domain(x)) random_points.push_back(std::move(x));
  }

  std::vector<InstabilityVerdict> out;
  for (int k : trap.k_values) {
    InstabilityVerdict v{k, !directional.empty() && modulus > 1.0, std::nullopt, modulus, 0.0};
    const StateMap hk = sys.complete_at(k);
    for (const auto& x : directional) {
      const Vector img = compose_power(hk, x, trap.period);
      if (img.allFinite() && (img - trap.center).norm() <= trap.radius) {
        v.escapes_boundary = false;
        if (!v.witness) v.witness = x;
      }
    }
    std::size_t escaped = 0;
    for (const auto& x : random_points) {
      const Vector img = compose_power(hk, x, trap.period);
      if (!img.allFinite() || (img - trap.center).norm() > trap.radius) ++escaped;
    }
    v.random_escape_fraction =
        random_points.empty() ? 0.0 : static_cast<double>(escaped) / static_cast<double>(random_points.size());
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace slowfast
