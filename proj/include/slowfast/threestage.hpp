#pragma once

// Three stages (juveniles, active adults, inactive adults) in two patches.
// Fertility and activation depend on local active-adult density:
//   f^a(x) = phi^a / (1 + c^a x),   g^a(x) = 1 / (1 + d^a x).

#include "slowfast/metapop.hpp"

#include <array>
#include <cmath>

namespace slowfast::threestage {

inline constexpr int kStages = 3;
inline constexpr int kPatches = 2;

struct ThreeStageParams {
  std::array<std::array<double, kPatches>, kStages> survival{};  // s_i^a
  std::array<double, kPatches> fertility{};                       // phi^a
  std::array<double, kPatches> fertility_crowding{};              // c^a
  std::array<double, kPatches> activation_crowding{};             // d^a
  std::array<double, kStages> perron_fraction{};                  // v_i^1
  std::array<double, kStages> mixing{0.9, 0.9, 0.9};              // theta_i = p_i + q_i

  double v(int stage, int patch) const {
    return patch == 0 ? perron_fraction[stage] : 1.0 - perron_fraction[stage];
  }

  /// Equal vital rates in both patches.
  static ThreeStageParams homogeneous(double s1, double s2, double s3, double phi, double c, double d,
                                      std::array<double, kStages> fractions) {
    ThreeStageParams p;
    p.survival = {{{s1, s1}, {s2, s2}, {s3, s3}}};
    p.fertility = {phi, phi};
    p.fertility_crowding = {c, c};
    p.activation_crowding = {d, d};
    p.perron_fraction = fractions;
    return p;
  }

  /// Set dispersal of one stage from migration rates p (1 -> 2), q (2 -> 1).
  void set_migration_rates(int stage, double p, double q) {
    perron_fraction[stage] = q / (p + q);
    mixing[stage] = p + q;
  }

  bool survival_homogeneous() const {
    for (const auto& s : survival) {
      if (s[0] != s[1]) return false;
    }
    return true;
  }

  bool fully_homogeneous() const {
    return survival_homogeneous() && fertility[0] == fertility[1] &&
           fertility_crowding[0] == fertility_crowding[1] && activation_crowding[0] == activation_crowding[1];
  }
};

/// Upper bound on the mixing strength that keeps p, q in [0, 1].
inline double max_mixing(double fraction) { return 1.0 / std::max(fraction, 1.0 - fraction); }

/// Checks vital-rate ranges. Perron fractions on the closed interval are
/// accepted when only closed-form quantities are needed.
inline void validate(const ThreeStageParams& p, bool allow_boundary_fractions = false) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::invalid_argument, what); };
  for (const auto& stage : p.survival) {
    for (double s : stage) {
      if (!(s > 0.0 && s < 1.0)) fail("survival rates must lie in (0,1)");
    }
  }
  for (int a = 0; a < kPatches; ++a) {
    if (!(p.fertility[a] > 0.0)) fail("inherent fertility must be positive");
    if (!(p.fertility_crowding[a] >= 0.0) || !(p.activation_crowding[a] >= 0.0)) {
      fail("crowding coefficients must be nonnegative");
    }
  }
  for (int i = 0; i < kStages; ++i) {
    const double v = p.perron_fraction[i];
    if (allow_boundary_fractions ? !(v >= 0.0 && v <= 1.0) : !(v > 0.0 && v < 1.0)) {
      fail("Perron fractions must lie in (0,1)");
    }
    if (!allow_boundary_fractions && !(p.mixing[i] > 0.0 && p.mixing[i] <= max_mixing(v) * (1.0 + 1e-12))) {
      fail("mixing strength must lie in (0, 1/max(v, 1-v)]");
    }
  }
}

inline StochasticMatrix dispersal_matrix(const ThreeStageParams& p, int stage) {
  const double v = p.perron_fraction[stage];
  const double theta = p.mixing[stage];
  return StochasticMatrix::from_migration_rates(theta * (1.0 - v), theta * v);
}

// ---------------------------------------------------------------------------
// Demography

struct DemographyMatrices {
  Matrix full;      // D
  Matrix tilde;     // D~
  Matrix survival;  // S, diagonal
};

/// X = (x_1^1, x_1^2, x_2^1, x_2^2, x_3^1, x_3^2).
inline DemographyMatrices demography_matrix(const ThreeStageParams& p, const Vector& x) {
  if (x.size() != kStages * kPatches) throw Error(ErrorCode::invalid_argument, "state must have 6 entries");
  Matrix tilde = Matrix::Zero(6, 6);
  Matrix s = Matrix::Zero(6, 6);
  for (int a = 0; a < kPatches; ++a) {
    const double active = x(2 + a);
    const double f = p.fertility[a] / (1.0 + p.fertility_crowding[a] * active);
    const double g = 1.0 / (1.0 + p.activation_crowding[a] * active);
    tilde(a, 2 + a) = f;              // active adults -> juveniles
    tilde(2 + a, a) = 1.0;            // juveniles -> active adults
    tilde(2 + a, 4 + a) = g;          // inactive -> active
    tilde(4 + a, 2 + a) = 1.0;        // active -> inactive
    tilde(4 + a, 4 + a) = 1.0 - g;    // inactive stay inactive
    for (int i = 0; i < kStages; ++i) s(2 * i + a, 2 * i + a) = p.survival[i][a];
  }
  Matrix full = tilde * s;
  return {std::move(full), std::move(tilde), std::move(s)};
}

inline Vector survival_vector(const ThreeStageParams& p) {
  Vector s(6);
  for (int i = 0; i < kStages; ++i) {
    for (int a = 0; a < kPatches; ++a) s(2 * i + a) = p.survival[i][a];
  }
  return s;
}

/// Constant dispersal and survival, density-dependent demography.
inline MetapopModel metapop_model(const ThreeStageParams& p) {
  validate(p);
  std::vector<StochasticMatrix> m;
  for (int i = 0; i < kStages; ++i) m.push_back(dispersal_matrix(p, i));
  MetapopModel model;
  model.stages = kStages;
  model.patches = kPatches;
  model.dispersal = [m](Index stage, const Vector&) { return m[static_cast<std::size_t>(stage)]; };
  model.survival = [s = survival_vector(p)](const Vector&) { return s; };
  model.demography = [p](const Vector& x) { return demography_matrix(p, x).full; };
  return model;
}

inline TwoScaleSystem two_scale_system(const ThreeStageParams& p, Variant variant) {
  return slowfast::two_scale_system(metapop_model(p), variant);
}

// ---------------------------------------------------------------------------
// Reduced coefficients

/// sum_a weight_a / (1 + rate_a y)
struct RationalSum {
  std::array<double, kPatches> weight{};
  std::array<double, kPatches> rate{};

  double operator()(double y) const {
    double total = 0.0;
    for (int a = 0; a < kPatches; ++a) {
      const double denom = 1.0 + rate[a] * y;
      if (!(denom > 0.0)) {
        throw Error(ErrorCode::negative_density, "density below the pole of the h-function");
      }
      total += weight[a] / denom;
    }
    return total;
  }

  double derivative(double y) const {
    double total = 0.0;
    for (int a = 0; a < kPatches; ++a) {
      const double denom = 1.0 + rate[a] * y;
      total -= weight[a] * rate[a] / (denom * denom);
    }
    return total;
  }

  double derivative_at_zero() const { return -(weight[0] * rate[0] + weight[1] * rate[1]); }
};

struct ReducedCoefficients {
  Variant variant;
  std::array<double, kStages> s{};  // aggregated survivals
  double b = 0.0;                   // aggregated inherent fertility
  RationalSum h1;                   // fertility density dependence
  RationalSum h2;                   // activation density dependence
};

inline ReducedCoefficients reduced_coefficients(const ThreeStageParams& p, Variant variant) {
  validate(p, true);
  ReducedCoefficients rc;
  rc.variant = variant;
  if (variant == Variant::slow) {
    for (int i = 0; i < kStages; ++i) rc.s[i] = p.survival[i][0] * p.v(i, 0) + p.survival[i][1] * p.v(i, 1);
    for (int a = 0; a < kPatches; ++a) rc.b += p.fertility[a] * p.survival[1][a] * p.v(1, a);
    for (int a = 0; a < kPatches; ++a) {
      rc.h1.weight[a] = p.fertility[a] * p.survival[1][a] * p.v(1, a) / rc.b;
      rc.h1.rate[a] = p.fertility_crowding[a] * p.v(1, a);
      rc.h2.weight[a] = p.survival[2][a] * p.v(2, a) / rc.s[2];
      rc.h2.rate[a] = p.activation_crowding[a] * p.v(1, a);
    }
  } else {
    // Weighted geometric means; x^0 = 1 keeps boundary fractions exact.
    for (int i = 0; i < kStages; ++i) {
      rc.s[i] = std::pow(p.survival[i][0], p.v(i, 0)) * std::pow(p.survival[i][1], p.v(i, 1));
    }
    const double s2 = rc.s[1];
    rc.b = s2 * (p.fertility[0] * p.v(1, 0) + p.fertility[1] * p.v(1, 1));
    for (int a = 0; a < kPatches; ++a) {
      rc.h1.weight[a] = p.fertility[a] * s2 * p.v(1, a) / rc.b;
      rc.h1.rate[a] = p.fertility_crowding[a] * s2 * p.v(1, a);
      rc.h2.weight[a] = p.v(2, a);
      rc.h2.rate[a] = p.activation_crowding[a] * s2 * p.v(1, a);
    }
  }
  return rc;
}

/// The 3x3 projection matrix of the reduced system at active-adult total y2.
inline Matrix reduced_matrix(const ReducedCoefficients& rc, double y2) {
  const double h1 = rc.h1(y2);
  const double h2 = rc.h2(y2);
  Matrix a = Matrix::Zero(3, 3);
  a(0, 1) = rc.b * h1;
  a(1, 0) = rc.s[0];
  a(1, 2) = rc.s[2] * h2;
  a(2, 1) = rc.s[1];
  a(2, 2) = rc.s[2] * (1.0 - h2);
  return a;
}

inline Vector reduced_step(const ReducedCoefficients& rc, const Vector& y) {
  if (y.size() != kStages) throw Error(ErrorCode::invalid_argument, "global state must have 3 entries");
  return reduced_matrix(rc, y(1)) * y;
}

inline Vector reduced_step(const ThreeStageParams& p, Variant variant, const Vector& y) {
  return reduced_step(reduced_coefficients(p, variant), y);
}

inline StateMap reduced_map(const ThreeStageParams& p, Variant variant) {
  return [rc = reduced_coefficients(p, variant)](const Vector& y) { return reduced_step(rc, y); };
}

inline double inherent_R0(const ReducedCoefficients& rc) { return rc.b * rc.s[0] / (1.0 - rc.s[1] * rc.s[2]); }

inline double inherent_R0(const ThreeStageParams& p, Variant variant) {
  return inherent_R0(reduced_coefficients(p, variant));
}

// ---------------------------------------------------------------------------
// Local (isolated patch) dynamics

struct LocalQuantities {
  double R0;
  double a_minus;
};

inline LocalQuantities local_quantities(const ThreeStageParams& p, int patch) {
  const double s1 = p.survival[0][patch];
  const double s2 = p.survival[1][patch];
  const double s3 = p.survival[2][patch];
  const double r0 = p.fertility[patch] * s1 * s2 / (1.0 - s2 * s3);
  const double am = -(1.0 - s2 * s3) * s1 * p.fertility_crowding[patch] +
                    s1 * s2 * s3 * (1.0 - s3) * p.activation_crowding[patch];
  return {r0, am};
}

/// Projection matrix of an isolated patch at local active-adult density y2.
inline Matrix local_matrix(const ThreeStageParams& p, int patch, double y2) {
  const double s1 = p.survival[0][patch];
  const double s2 = p.survival[1][patch];
  const double s3 = p.survival[2][patch];
  const double fd = 1.0 + p.fertility_crowding[patch] * y2;
  const double gd = 1.0 + p.activation_crowding[patch] * y2;
  if (!(fd > 0.0) || !(gd > 0.0)) throw Error(ErrorCode::negative_density, "density below pole");
  Matrix a = Matrix::Zero(3, 3);
  a(0, 1) = s2 * p.fertility[patch] / fd;
  a(1, 0) = s1;
  a(1, 2) = s3 / gd;
  a(2, 1) = s2;
  a(2, 2) = s3 * (1.0 - 1.0 / gd);
  return a;
}

inline StateMap local_map(const ThreeStageParams& p, int patch) {
  return [p, patch](const Vector& y) { return Vector(local_matrix(p, patch, y(1)) * y); };
}

// ---------------------------------------------------------------------------
// Bifurcation at R0 = 1

struct BifurcationData {
  double R0;
  double c_w;
  double c_b;
  double a_plus;
  double a_minus;
};

inline BifurcationData bifurcation_data(const ReducedCoefficients& rc) {
  const auto& s = rc.s;
  const double c_w = (1.0 - s[1] * s[2]) * s[0] * rc.h1.derivative_at_zero();
  const double c_b = s[0] * s[1] * s[2] * (1.0 - s[2]) * rc.h2.derivative_at_zero();
  return {inherent_R0(rc), c_w, c_b, c_w + c_b, c_w - c_b};
}

inline BifurcationData bifurcation_data(const ThreeStageParams& p, Variant variant) {
  return bifurcation_data(reduced_coefficients(p, variant));
}

/// First-order branch parameterizations near (R0, Y) = (1, 0).
struct BranchPrediction {
  double R0_equilibrium;
  Vector equilibrium;
  double R0_cycle;
  Vector cycle_y2;   // (0, y2, 0)
  Vector cycle_y13;  // (y1, 0, y3)
};

inline BranchPrediction branch_prediction(const ReducedCoefficients& rc, double eps) {
  const auto& s = rc.s;
  const BifurcationData bd = bifurcation_data(rc);
  const double denom = 1.0 - s[1] * s[2];
  BranchPrediction bp;
  bp.R0_equilibrium = 1.0 - bd.a_plus * eps / denom;
  bp.equilibrium = Vector(3);
  bp.equilibrium << denom * eps, s[0] * eps, s[0] * s[1] * eps;
  bp.R0_cycle = 1.0 - bd.c_w * eps / denom;
  bp.cycle_y2 = Vector(3);
  bp.cycle_y2 << 0.0, s[0] * eps, 0.0;
  bp.cycle_y13 = Vector(3);
  bp.cycle_y13 << denom * eps, 0.0, s[0] * s[1] * eps;
  return bp;
}

inline BranchPrediction branch_prediction(const ThreeStageParams& p, Variant variant, double eps) {
  return branch_prediction(reduced_coefficients(p, variant), eps);
}

/// Scale both inherent fertilities so the variant's R0 equals target.
/// R0 is linear in (phi^1, phi^2) jointly; the h-functions do not change.
inline ThreeStageParams with_R0(ThreeStageParams p, Variant variant, double target) {
  const double factor = target / inherent_R0(p, variant);
  for (double& phi : p.fertility) phi *= factor;
  return p;
}

/// Branch parameter eps at which the first-order equilibrium branch reaches
/// the current R0 (positive when R0 > 1 and a_plus < 0).
inline double equilibrium_branch_eps(const ReducedCoefficients& rc) {
  const BifurcationData bd = bifurcation_data(rc);
  return (bd.R0 - 1.0) * (1.0 - rc.s[1] * rc.s[2]) / -bd.a_plus;
}

inline double cycle_branch_eps(const ReducedCoefficients& rc) {
  const BifurcationData bd = bifurcation_data(rc);
  return (bd.R0 - 1.0) * (1.0 - rc.s[1] * rc.s[2]) / -bd.c_w;
}

}  // namespace slowfast::threestage
