#pragma once

// Orbit solvers, stability classification, dispersal design searches and the
// comparison between the two survival variants.

#include "slowfast/aggregation.hpp"
#include "slowfast/threestage.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

namespace slowfast::analysis {

using threestage::ThreeStageParams;

enum class OrbitKind { equilibrium, two_cycle };
enum class Stability { stable, unstable, nonhyperbolic };

inline std::string_view to_string(OrbitKind k) { return k == OrbitKind::equilibrium ? "equilibrium" : "two_cycle"; }

inline std::string_view to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    case Stability::nonhyperbolic: return "nonhyperbolic";
  }
  return "unknown";
}

inline constexpr double kHyperbolicBand = 1e-6;
inline constexpr double kOrbitResidual = 1e-8;
inline constexpr double kSupportTolerance = 1e-8;

inline Stability classify(double rho, double band = kHyperbolicBand) {
  if (rho < 1.0 - band) return Stability::stable;
  if (rho > 1.0 + band) return Stability::unstable;
  return Stability::nonhyperbolic;
}

struct OrbitReport {
  OrbitKind kind = OrbitKind::equilibrium;
  std::vector<Vector> points;
  double residual = 0.0;
  double spectral_radius = 0.0;  // of the Jacobian of map^m at points[0]
  Stability classification = Stability::nonhyperbolic;
  bool synchronous = false;      // (0, y2, 0) / (y1, 0, y3) support pattern
  int iterations = 0;

  int period() const { return kind == OrbitKind::equilibrium ? 1 : 2; }
};

struct SolverOptions {
  int max_iterations = 200;
  int max_halvings = 20;
  long burn_in = 10000;
  double band = kHyperbolicBand;
};

/// Support pattern of a synchronous 2-cycle in a three-stage reduced system.
inline bool synchronous_pattern(const Vector& a, const Vector& b, double tol = kSupportTolerance) {
  if (a.size() != 3 || b.size() != 3) return false;
  auto only_y2 = [tol](const Vector& y) { return std::abs(y(0)) <= tol && std::abs(y(2)) <= tol && y(1) > tol; };
  auto no_y2 = [tol](const Vector& y) { return std::abs(y(1)) <= tol && (y(0) > tol || y(2) > tol); };
  return (only_y2(a) && no_y2(b)) || (only_y2(b) && no_y2(a));
}

namespace detail {

inline Vector snap_to_orthant(Vector y, double scale) {
  const double floor = -1e-12 * (1.0 + scale);
  for (Index i = 0; i < y.size(); ++i) {
    if (y(i) < 0.0 && y(i) >= floor) y(i) = 0.0;
  }
  return y;
}

struct NewtonResult {
  Vector point;
  double residual;
  int iterations;
};

/// Damped Newton on y - f(y) = 0 with a finite-difference Jacobian.
inline NewtonResult newton_fixed_point(const StateMap& f, Vector y, const DomainPredicate& domain,
                                       const SolverOptions& opts) {
  if (!domain(y)) throw Error(ErrorCode::left_domain, "initial point outside the domain");
  const Index n = y.size();
  auto residual_of = [&f](const Vector& x) { return Vector(x - f(x)); };
  Vector r = residual_of(y);
  double best = r.norm();
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (!(best > 1e-15 * std::max(1e-300, y.norm()))) break;
    const Matrix jac = Matrix::Identity(n, n) - finite_difference_jacobian(f, y);
    const Vector step = -jac.fullPivLu().solve(r);
    if (!step.allFinite()) break;
    double lambda = 1.0;
    bool accepted = false;
    bool inside_any = false;
    Vector candidate;
    Vector cand_r;
    for (int h = 0; h <= opts.max_halvings; ++h, lambda *= 0.5) {
      candidate = snap_to_orthant(y + lambda * step, y.norm());
      if (!domain(candidate)) continue;
      inside_any = true;
      try {
        cand_r = residual_of(candidate);
      } catch (const Error&) {
        continue;
      }
      if (cand_r.allFinite() && cand_r.norm() < best) {
        accepted = true;
        break;
      }
    }
    if (!inside_any) throw Error(ErrorCode::left_domain, "Newton step leaves the domain after all halvings");
    if (!accepted) break;
    const double step_size = (candidate - y).norm();
    y = candidate;
    r = cand_r;
    best = r.norm();
    if (step_size <= 1e-16 * std::max(1.0, y.norm())) break;
  }
  return {y, best, it};
}

inline double jacobian_radius(const StateMap& f, const Vector& y) {
  return spectral_radius(finite_difference_jacobian(f, y));
}

}  // namespace detail

inline OrbitReport find_equilibrium(const StateMap& map, const Vector& y0,
                                    const DomainPredicate& domain = in_population_domain,
                                    const SolverOptions& opts = {}) {
  const detail::NewtonResult nr = detail::newton_fixed_point(map, y0, domain, opts);
  if (!(nr.residual <= kOrbitResidual)) {
    std::ostringstream os;
    os << "best residual " << nr.residual;
    throw Error(ErrorCode::no_convergence, os.str());
  }
  OrbitReport rep;
  rep.kind = OrbitKind::equilibrium;
  rep.points = {nr.point};
  rep.residual = (map(nr.point) - nr.point).norm();
  rep.spectral_radius = detail::jacobian_radius(map, nr.point);
  rep.classification = classify(rep.spectral_radius, opts.band);
  rep.iterations = nr.iterations;
  return rep;
}

inline OrbitReport find_two_cycle(const StateMap& map, const Vector& y0,
                                  const DomainPredicate& domain = in_population_domain,
                                  const SolverOptions& opts = {}) {
  if (y0.size() == 0 || y0.minCoeff() < 0.0) throw Error(ErrorCode::invalid_argument, "initial state must be >= 0");
  Vector y = y0;
  for (long t = 0; t < opts.burn_in; ++t) {
    y = map(y);
    if (!domain(y)) throw Error(ErrorCode::left_domain, "burn-in orbit left the domain");
  }
  const StateMap twice = [&map](const Vector& x) { return Vector(map(map(x))); };
  const detail::NewtonResult nr = detail::newton_fixed_point(twice, y, domain, opts);
  if (!(nr.residual <= kOrbitResidual)) {
    std::ostringstream os;
    os << "best residual " << nr.residual;
    throw Error(ErrorCode::no_convergence, os.str());
  }
  const Vector p = nr.point;
  const Vector q = map(p);
  if ((p - q).norm() <= kSupportTolerance) {
    throw Error(ErrorCode::collapsed_to_equilibrium, "the two cycle points coincide");
  }
  OrbitReport rep;
  rep.kind = OrbitKind::two_cycle;
  rep.points = {p, q};
  rep.residual = std::max((twice(p) - p).norm(), (twice(q) - q).norm());
  rep.spectral_radius = detail::jacobian_radius(twice, p);
  rep.classification = classify(rep.spectral_radius, opts.band);
  rep.synchronous = synchronous_pattern(p, q);
  rep.iterations = nr.iterations;
  return rep;
}

// ---------------------------------------------------------------------------
// Dispersal design searches

inline constexpr int kGridDivisions = 64;

struct GridCell {
  double x;
  double y;
  double value;
};

struct DesignSearchResult {
  int divisions = kGridDivisions;
  std::vector<GridCell> cells;  // grid nodes meeting the target sign
  bool feasible_region_nonempty = false;
  std::optional<GridCell> witness;
  bool hypothesis_holds = true;
  std::optional<bool> predicate;  // closed-form feasibility test, when one exists
};

enum class SurvivalTarget { rescue, extinguish };

inline bool survival_search_hypothesis(const ThreeStageParams& p, SurvivalTarget target) {
  const bool same_adults = p.survival[1][0] == p.survival[1][1] && p.survival[2][0] == p.survival[2][1];
  if (!same_adults) return false;
  const double r1 = threestage::local_quantities(p, 0).R0;
  const double r2 = threestage::local_quantities(p, 1).R0;
  const double s2 = p.survival[1][0];
  const double s3 = p.survival[2][0];
  const double bound = (1.0 - s2 * s3) / s2;
  const double cross12 = p.survival[0][0] * p.fertility[1];
  const double cross21 = p.survival[0][1] * p.fertility[0];
  if (target == SurvivalTarget::rescue) return r1 < 1.0 && r2 < 1.0 && std::max(cross12, cross21) > bound;
  return r1 > 1.0 && r2 > 1.0 && std::min(cross12, cross21) < bound;
}

/// Sweeps (v_1^1, v_2^1) over the nodes i/64 and keeps those where R0 - 1
/// has the target sign (positive for rescue, negative for extinguish).
inline DesignSearchResult dispersal_search_survival(const ThreeStageParams& params, SurvivalTarget target,
                                                    Variant variant, int divisions = kGridDivisions) {
  threestage::validate(params, true);
  DesignSearchResult res;
  res.divisions = divisions;
  res.hypothesis_holds = survival_search_hypothesis(params, target);
  const double sign = target == SurvivalTarget::rescue ? 1.0 : -1.0;
  ThreeStageParams p = params;
  for (int i = 0; i <= divisions; ++i) {
    for (int j = 0; j <= divisions; ++j) {
      p.perron_fraction[0] = static_cast<double>(i) / divisions;
      p.perron_fraction[1] = static_cast<double>(j) / divisions;
      const double value = threestage::inherent_R0(p, variant) - 1.0;
      if (sign * value > 0.0) {
        GridCell cell{p.perron_fraction[0], p.perron_fraction[1], value};
        res.cells.push_back(cell);
        if (!res.witness || sign * value > sign * res.witness->value) res.witness = cell;
      }
    }
  }
  res.feasible_region_nonempty = !res.cells.empty();
  return res;
}

enum class SynchronyTarget { negative, positive };

/// (xy + (1-x)(1-y)) / (x^2 + (1-x)^2)
inline double synchrony_ratio(double x, double y) {
  return (x * y + (1.0 - x) * (1.0 - y)) / (x * x + (1.0 - x) * (1.0 - x));
}

/// Closed-form test for a positive a_minus being reachable by dispersal in
/// homogeneous patches.
inline bool synchrony_predicate(const ThreeStageParams& p) {
  const double s1 = p.survival[0][0];
  const double s2 = p.survival[1][0];
  const double s3 = p.survival[2][0];
  const double lhs = (1.0 - s2 * s3) * s1 * p.fertility_crowding[0];
  const double rhs = (1.0 + std::sqrt(2.0)) / 2.0 * s1 * s2 * s3 * (1.0 - s3) * p.activation_crowding[0];
  return lhs < rhs;
}

/// Sweeps (v_2^1, v_3^1) over the nodes i/64 and keeps those where the
/// slow-variant a_minus has the target sign. The grid is complemented by the
/// exact maximizer (or minimizer) over the square: a_minus is linear in v_3^1
/// and concave in v_2^1, so the extremum sits on an edge y in {0, 1}.
inline DesignSearchResult dispersal_search_synchrony(const ThreeStageParams& params, SynchronyTarget target,
                                                     int divisions = kGridDivisions) {
  threestage::validate(params, true);
  if (!params.fully_homogeneous()) {
    throw Error(ErrorCode::inhomogeneous_params, "synchrony search requires homogeneous patches");
  }
  DesignSearchResult res;
  res.divisions = divisions;
  res.predicate = synchrony_predicate(params);
  const double sign = target == SynchronyTarget::positive ? 1.0 : -1.0;
  ThreeStageParams p = params;
  auto a_minus_at = [&p](double x, double y) {
    p.perron_fraction[1] = x;
    p.perron_fraction[2] = y;
    return threestage::bifurcation_data(p, Variant::slow).a_minus;
  };
  auto consider = [&res, sign](const GridCell& cell, bool on_grid) {
    if (!(sign * cell.value > 0.0)) return;
    if (on_grid) res.cells.push_back(cell);
    if (!res.witness || sign * cell.value > sign * res.witness->value) res.witness = cell;
  };
  for (int i = 0; i <= divisions; ++i) {
    for (int j = 0; j <= divisions; ++j) {
      const double x = static_cast<double>(i) / divisions;
      const double y = static_cast<double>(j) / divisions;
      consider({x, y, a_minus_at(x, y)}, true);
    }
  }

  const double s1 = p.survival[0][0];
  const double s2 = p.survival[1][0];
  const double s3 = p.survival[2][0];
  const double w = (1.0 - s2 * s3) * s1 * p.fertility_crowding[0];
  const double bt = s1 * s2 * s3 * (1.0 - s3) * p.activation_crowding[0];
  // a_minus(x, y) = -w (x^2 + (1-x)^2) + bt (xy + (1-x)(1-y)); on y = 0 the
  // vertex is at x = 1/2 - bt / (4w), on y = 1 at x = 1/2 + bt / (4w).
  if (target == SynchronyTarget::positive) {
    for (double y : {0.0, 1.0}) {
      std::vector<double> xs{0.0, 1.0};
      if (w > 0.0) xs.push_back(std::clamp(0.5 + (y == 0.0 ? -1.0 : 1.0) * bt / (4.0 * w), 0.0, 1.0));
      for (double x : xs) consider({x, y, a_minus_at(x, y)}, false);
    }
  }
  res.feasible_region_nonempty = res.witness.has_value();
  return res;
}

/// Maximum of the synchrony ratio over [0,1]^2: grid of 1024 x 1024 cells,
/// then coordinate-wise golden-section refinement around the best node.
inline double synchrony_ratio_max(int divisions = 1024) {
  double best = -1.0;
  double bx = 0.0;
  double by = 0.0;
  for (int i = 0; i <= divisions; ++i) {
    for (int j = 0; j <= divisions; ++j) {
      const double x = static_cast<double>(i) / divisions;
      const double y = static_cast<double>(j) / divisions;
      const double v = synchrony_ratio(x, y);
      if (v > best) {
        best = v;
        bx = x;
        by = y;
      }
    }
  }
  const double h = 1.0 / divisions;
  auto golden = [](auto&& f, double lo, double hi) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 100; ++it) {
      if (fc > fd) {
        b = d; d = c; fd = fc;
        c = b - g * (b - a); fc = f(c);
      } else {
        a = c; c = d; fc = fd;
        d = a + g * (b - a); fd = f(d);
      }
    }
    return (a + b) / 2.0;
  };
  for (int round = 0; round < 8; ++round) {
    bx = golden([by](double x) { return synchrony_ratio(x, by); }, std::max(0.0, bx - h), std::min(1.0, bx + h));
    by = golden([bx](double y) { return synchrony_ratio(bx, y); }, std::max(0.0, by - h), std::min(1.0, by + h));
    // The maximum may sit on the boundary; the endpoints are checked directly.
    for (double y : {0.0, 1.0, by}) best = std::max(best, synchrony_ratio(bx, y));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Variant comparison

enum class Ordering { rescaled_below, equal, rescaled_above };

inline std::string_view to_string(Ordering o) {
  switch (o) {
    case Ordering::rescaled_below: return "rescaled_below";
    case Ordering::equal: return "equal";
    case Ordering::rescaled_above: return "rescaled_above";
  }
  return "unknown";
}

struct VariantComparison {
  double R0_slow;
  double R0_rescaled;
  double a_minus_slow;
  double a_minus_rescaled;
  Ordering ordering;
  bool extinction_flip;
  /// With equal fertilities the rescaled R0 is strictly smaller unless the
  /// survivals agree across patches; false flags a violation.
  bool ordering_consistent;
};

inline VariantComparison compare_variants(const ThreeStageParams& p, double tol = 1e-12) {
  const auto slow = threestage::bifurcation_data(p, Variant::slow);
  const auto resc = threestage::bifurcation_data(p, Variant::rescaled);
  VariantComparison c{};
  c.R0_slow = slow.R0;
  c.R0_rescaled = resc.R0;
  c.a_minus_slow = slow.a_minus;
  c.a_minus_rescaled = resc.a_minus;
  const double diff = resc.R0 - slow.R0;
  c.ordering = std::abs(diff) <= tol * std::max(1.0, slow.R0) ? Ordering::equal
               : diff < 0.0                                   ? Ordering::rescaled_below
                                                              : Ordering::rescaled_above;
  c.extinction_flip = (resc.R0 < 1.0 && slow.R0 > 1.0) || (resc.R0 > 1.0 && slow.R0 < 1.0);
  c.ordering_consistent = true;
  if (p.fertility[0] == p.fertility[1]) {
    bool mixed = false;
    for (int i = 0; i < threestage::kStages; ++i) {
      const double v = p.perron_fraction[i];
      if (p.survival[i][0] != p.survival[i][1] && v > 0.0 && v < 1.0) mixed = true;
    }
    c.ordering_consistent = mixed ? c.ordering == Ordering::rescaled_below : c.ordering == Ordering::equal;
  }
  return c;
}

}  // namespace slowfast::analysis
