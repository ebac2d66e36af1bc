#pragma once

// Randomized property suites over the library invariants. Each suite returns
// a named verdict with a short detail line; `run_all` drives the CLI check.

#include "slowfast/aggregation.hpp"
#include "slowfast/analysis.hpp"
#include "slowfast/config.hpp"
#include "slowfast/metapop.hpp"
#include "slowfast/scenario.hpp"
#include "slowfast/spectral_core.hpp"
#include "slowfast/threestage.hpp"

#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace slowfast::properties {

using threestage::ThreeStageParams;

struct PropertyResult {
  std::string name;
  bool passed;
  std::string detail;
};

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Generators

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

/// Entrywise positive column-stochastic matrix (hence primitive).
inline StochasticMatrix random_stochastic(Rng& rng, Index r) {
  Matrix m(r, r);
  for (Index j = 0; j < r; ++j) {
    for (Index i = 0; i < r; ++i) m(i, j) = uniform(rng, 0.05, 1.0);
    m.col(j) /= m.col(j).sum();
  }
  return StochasticMatrix(m);
}

inline Vector random_survival(Rng& rng, Index r, double lo = 0.1, double hi = 0.9) {
  Vector s(r);
  for (Index i = 0; i < r; ++i) s(i) = uniform(rng, lo, hi);
  return s;
}

/// Heterogeneous two-patch parameters in the biologically sensible range.
inline ThreeStageParams random_params(Rng& rng) {
  ThreeStageParams p;
  for (auto& stage : p.survival) {
    for (double& s : stage) s = uniform(rng, 0.1, 0.9);
  }
  for (int a = 0; a < 2; ++a) {
    p.fertility[a] = uniform(rng, 0.5, 6.0);
    p.fertility_crowding[a] = uniform(rng, 0.2, 3.0);
    p.activation_crowding[a] = uniform(rng, 0.2, 12.0);
  }
  for (int i = 0; i < 3; ++i) {
    p.perron_fraction[i] = uniform(rng, 0.05, 0.95);
    p.mixing[i] = uniform(rng, 0.3, 1.0);
  }
  return p;
}

/// Patch-homogeneous parameters; only the Perron fractions differ by patch.
inline ThreeStageParams random_homogeneous(Rng& rng) {
  return ThreeStageParams::homogeneous(uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9),
                                       uniform(rng, 0.5, 6.0), uniform(rng, 0.2, 3.0), uniform(rng, 0.2, 20.0),
                                       {uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95)});
}

inline Vector random_state(Rng& rng, Index n, double hi = 0.2) {
  Vector x(n);
  for (Index i = 0; i < n; ++i) x(i) = uniform(rng, 0.0, hi);
  return x;
}

inline std::vector<ThreeStageParams> shipped_params() {
  return {cli::fig2_params(), cli::fig3_params(), cli::fig10_params(), cli::extinction_flip_params()};
}

namespace detail {

inline PropertyResult verdict(std::string name, int failures, int total, const std::string& extra = "") {
  std::ostringstream os;
  os << (total - failures) << "/" << total << " cases hold";
  if (!extra.empty()) os << "; " << extra;
  return {std::move(name), failures == 0, os.str()};
}

inline double floor_tolerance(double scale) { return 1e-14 + 1e-12 * scale; }

}  // namespace detail

// ---------------------------------------------------------------------------
// spectral_core

inline PropertyResult power_decay(Rng& rng, int draws = 50) {
  int failures = 0;
  for (int n = 0; n < draws; ++n) {
    const auto m = random_stochastic(rng, 2 + n % 3);
    const auto pd = perron_vector(m);
    const Matrix limit = pd.v * Vector::Ones(m.dim()).transpose();
    double prev = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (int k : {10, 20, 40, 80}) {
      const double gap = norm1(slowfast::detail::matrix_power(m.matrix(), k) - limit);
      if (gap > prev + detail::floor_tolerance(1.0)) ok = false;
      // Geometric envelope with a generous constant; the floor covers the
      // power-iteration tolerance on v.
      if (gap > 1e3 * std::pow(pd.subdominant_modulus, k) + 1e-10) ok = false;
      prev = gap;
    }
    failures += !ok;
  }
  return detail::verdict("power_limit_geometric_decay", failures, draws);
}

inline PropertyResult rescaled_limit_convergence(Rng& rng, int draws = 50, bool commuted = false) {
  int failures = 0;
  double worst = 0.0;
  for (int n = 0; n < draws; ++n) {
    const Index r = 2 + n % 2;
    const auto m = random_stochastic(rng, r);
    const Vector s = random_survival(rng, r);
    const Matrix limit = rescaled_power_limit(s, m).limit_matrix;
    auto power = [&](int k) { return commuted ? rescaled_power_commuted(s, m, k) : rescaled_power(s, m, k); };
    const double g128 = norm1(power(128) - limit);
    const double g2048 = norm1(power(2048) - limit);
    worst = std::max(worst, g2048);
    failures += !(g2048 < 1e-2 && g2048 < g128);
  }
  std::ostringstream os;
  os << "worst gap at k=2048: " << worst;
  return detail::verdict(commuted ? "rescaled_limit_commuted" : "rescaled_limit", failures, draws, os.str());
}

inline PropertyResult perron_agrees_with_eigensolve(Rng& rng, int draws = 100) {
  int failures = 0;
  for (int n = 0; n < draws; ++n) {
    const auto m = random_stochastic(rng, 2 + n % 3);
    Eigen::EigenSolver<Matrix> es(m.matrix());
    Index best = 0;
    for (Index i = 1; i < m.dim(); ++i) {
      if (std::abs(es.eigenvalues()(i) - 1.0) < std::abs(es.eigenvalues()(best) - 1.0)) best = i;
    }
    Vector w = es.eigenvectors().col(best).real();
    w /= w.sum();
    failures += !((perron_vector(m).v - w).lpNorm<1>() < 1e-8);
  }
  return detail::verdict("perron_vector_matches_eigensolve", failures, draws);
}

inline PropertyResult am_gm(Rng& rng, int draws = 200) {
  int failures = 0;
  for (int n = 0; n < draws; ++n) {
    const Index r = 2 + n % 3;
    const auto m = random_stochastic(rng, r);
    const bool equal = n % 4 == 0;
    const Vector s = equal ? Vector::Constant(r, uniform(rng, 0.1, 0.9)) : random_survival(rng, r);
    const auto lim = rescaled_power_limit(s, m);
    const double arithmetic = s.dot(lim.v);
    const bool ok = equal ? std::abs(lim.gamma - arithmetic) < 1e-12 : lim.gamma < arithmetic;
    failures += !ok;
  }
  return detail::verdict("weighted_geometric_below_arithmetic", failures, draws);
}

// ---------------------------------------------------------------------------
// aggregation and metapop

inline PropertyResult reduced_commutation(Rng& rng, int draws = 1000) {
  int failures = 0;
  const ThreeStageParams p = cli::fig10_params();
  for (Variant v : {Variant::slow, Variant::rescaled}) {
    const TwoScaleSystem sys = threestage::two_scale_system(p, v);
    const StateMap reduced = reduced_map(sys);
    for (int n = 0; n < draws / 2; ++n) {
      const Vector x = random_state(rng, 6);
      const Vector lhs = sys.projection(sys.limit(x));
      const Vector rhs = reduced(sys.projection(x));
      failures += !((lhs - rhs).norm() <= 1e-10);
    }
  }
  return detail::verdict("projection_commutes_with_limit", failures, draws);
}

inline PropertyResult iterate_identity(Rng& rng, int draws = 20) {
  int failures = 0;
  int total = 0;
  for (Variant v : {Variant::slow, Variant::rescaled}) {
    const TwoScaleSystem sys = threestage::two_scale_system(cli::fig10_params(), v);
    const StateMap reduced = reduced_map(sys);
    for (int n = 0; n < draws; ++n) {
      const Vector x = random_state(rng, 6);
      for (int it = 1; it <= 3; ++it) {
        const Vector lhs = sys.lift(compose_power(reduced, sys.projection(x), it - 1));
        const Vector rhs = compose_power(sys.limit, x, it);
        failures += !((lhs - rhs).norm() <= 1e-8);
        ++total;
      }
    }
  }
  return detail::verdict("lift_of_reduced_iterates", failures, total);
}

inline PropertyResult spectral_link() {
  const TwoScaleSystem sys = threestage::two_scale_system(cli::fig2_params(), Variant::slow);
  const StateMap reduced = reduced_map(sys);
  const auto rc = threestage::reduced_coefficients(cli::fig2_params(), Variant::slow);
  const auto eq = analysis::find_equilibrium(
      reduced, threestage::branch_prediction(rc, threestage::equilibrium_branch_eps(rc)).equilibrium);
  const Vector x_star = sys.lift(eq.points[0]);
  const double rho_full = spectral_radius(finite_difference_jacobian(sys.limit, x_star));
  const double diff = std::abs(rho_full - eq.spectral_radius);
  std::ostringstream os;
  os << "reduced " << eq.spectral_radius << ", complete " << rho_full;
  return {"spectral_radius_link", diff <= 1e-4, os.str()};
}

inline PropertyResult convergence_tables_nonincreasing(Rng& rng) {
  int failures = 0;
  int total = 0;
  const std::vector<int> ks{1, 5, 10, 50, 100};
  for (const auto& p : shipped_params()) {
    for (Variant v : {Variant::slow, Variant::rescaled}) {
      const TwoScaleSystem sys = threestage::two_scale_system(p, v);
      std::vector<Vector> samples{cli::figure_initial_state()};
      for (int n = 0; n < 4; ++n) samples.push_back(random_state(rng, 6));
      const auto table = convergence_table(sys, samples, 1, ks);
      for (std::size_t i = 1; i < table.size(); ++i) {
        failures += table[i].failed || table[i].gap > table[i - 1].gap + detail::floor_tolerance(table[0].gap);
        ++total;
      }
    }
  }
  return detail::verdict("convergence_table_nonincreasing", failures, total);
}

inline PropertyResult dispersal_conserves_totals(Rng& rng, int draws = 200) {
  int failures = 0;
  for (int n = 0; n < draws; ++n) {
    const MetapopModel model = threestage::metapop_model(random_params(rng));
    const Vector x = random_state(rng, 6);
    const int k = 1 + n % 7;
    failures += !((aggregate(model, dispersal_power(model, x, k)) - aggregate(model, x)).norm() <= 1e-13);
  }
  return detail::verdict("dispersal_conserves_stage_totals", failures, draws);
}

inline PropertyResult limit_consistency(Rng& rng, int draws = 50) {
  int failures = 0;
  int total = 0;
  for (Variant v : {Variant::slow, Variant::rescaled}) {
    for (int n = 0; n < draws / 2; ++n) {
      const ThreeStageParams p = random_params(rng);
      const TwoScaleSystem sys = threestage::two_scale_system(p, v);
      const Vector x = random_state(rng, 6);
      const Vector h = sys.limit(x);
      const double g10 = (sys.complete(10, x) - h).norm();
      const double g200 = (sys.complete(200, x) - h).norm();
      failures += !(g200 < g10 || g200 <= 1e-14 * std::max(1.0, h.norm()));
      ++total;
    }
  }
  return detail::verdict("complete_step_approaches_limit", failures, total);
}

inline PropertyResult nonnegativity(Rng& rng, int draws = 200) {
  int failures = 0;
  for (int n = 0; n < draws; ++n) {
    const MetapopModel model = threestage::metapop_model(random_params(rng));
    Vector x = random_state(rng, 6, 5.0);
    if (n % 3 == 0) x(n % 6) = 0.0;
    const int k = 1 + n % 5;
    const Vector a = complete_step_slow(model, x, k);
    const Vector b = complete_step_rescaled(model, x, k);
    failures += !(a.minCoeff() >= 0.0 && b.minCoeff() >= 0.0);
  }
  return detail::verdict("complete_steps_preserve_orthant", failures, draws);
}

// ---------------------------------------------------------------------------
// threestage

inline PropertyResult homogeneous_variants_agree(Rng& rng, int draws = 100) {
  int failures = 0;
  for (int n = 0; n < draws; ++n) {
    const ThreeStageParams p = random_homogeneous(rng);
    const double s1 = p.survival[0][0], s2 = p.survival[1][0], s3 = p.survival[2][0];
    const double expected = p.fertility[0] * s1 * s2 / (1.0 - s2 * s3);
    const double bar = threestage::inherent_R0(p, Variant::slow);
    const double tilde = threestage::inherent_R0(p, Variant::rescaled);
    failures += !(std::abs(bar - expected) <= 1e-12 * expected && std::abs(tilde - expected) <= 1e-12 * expected);
  }
  return detail::verdict("homogeneous_R0_variants_agree", failures, draws);
}

inline PropertyResult h_derivatives(Rng& rng, int draws = 100) {
  int failures = 0;
  const double h = 1e-6;
  for (int n = 0; n < draws; ++n) {
    const auto rc = threestage::reduced_coefficients(random_params(rng), n % 2 ? Variant::rescaled : Variant::slow);
    for (const auto* f : {&rc.h1, &rc.h2}) {
      const double fd = ((*f)(h) - (*f)(-h)) / (2.0 * h);
      const double an = f->derivative_at_zero();
      failures += !(std::abs(fd - an) <= 1e-5 * std::abs(an));
    }
  }
  return detail::verdict("h_derivative_matches_differences", failures, 2 * draws);
}

inline PropertyResult a_coefficient_identities(Rng& rng, int draws = 100) {
  int failures = 0;
  for (int n = 0; n < draws; ++n) {
    const auto bd = threestage::bifurcation_data(random_params(rng), n % 2 ? Variant::rescaled : Variant::slow);
    failures += !(bd.a_plus + bd.a_minus == 2.0 * bd.c_w || std::abs(bd.a_plus + bd.a_minus - 2.0 * bd.c_w) <= 1e-15);
    failures += !(std::abs(bd.a_plus - bd.a_minus - 2.0 * bd.c_b) <= 1e-15);
  }
  return detail::verdict("a_plus_a_minus_identities", failures, 2 * draws);
}

inline PropertyResult extinction_threshold(Rng& rng, int draws = 100) {
  int failures = 0;
  for (int n = 0; n < draws; ++n) {
    const Variant v = n % 2 ? Variant::rescaled : Variant::slow;
    const double target = n % 4 < 2 ? uniform(rng, 0.5, 0.99) : uniform(rng, 1.01, 2.0);
    const ThreeStageParams p = threestage::with_R0(random_params(rng), v, target);
    const double rho = spectral_radius(threestage::reduced_matrix(threestage::reduced_coefficients(p, v), 0.0));
    failures += (rho < 1.0) != (target < 1.0);
  }
  return detail::verdict("extinction_threshold_at_R0_one", failures, draws);
}

inline PropertyResult persistence(Rng& rng, int starts = 20) {
  int failures = 0;
  int total = 0;
  for (const auto& p : shipped_params()) {
    for (Variant v : {Variant::slow, Variant::rescaled}) {
      if (threestage::inherent_R0(p, v) <= 1.0) continue;
      const auto rc = threestage::reduced_coefficients(p, v);
      for (int n = 0; n < starts; ++n) {
        Vector y = random_state(rng, 3, 1.0);
        y(n % 3) += 1e-3;
        double liminf = std::numeric_limits<double>::infinity();
        for (int t = 1; t <= 100000; ++t) {
          y = threestage::reduced_step(rc, y);
          if (t > 99000) liminf = std::min(liminf, y.sum());
        }
        failures += !(liminf > 1e-6);
        ++total;
      }
    }
  }
  return detail::verdict("persistence_above_threshold", failures, total);
}

inline PropertyResult h_monotone(Rng&) {
  int failures = 0;
  int total = 0;
  for (const auto& p : shipped_params()) {
    for (Variant v : {Variant::slow, Variant::rescaled}) {
      const auto rc = threestage::reduced_coefficients(p, v);
      for (const auto* f : {&rc.h1, &rc.h2}) {
        double prev = (*f)(0.0);
        bool ok = std::abs(prev - 1.0) <= 1e-12;
        for (int i = 1; i <= 1000; ++i) {
          const double cur = (*f)(0.1 * i);
          ok = ok && cur < prev;
          prev = cur;
        }
        failures += !ok;
        ++total;
      }
    }
  }
  return detail::verdict("h_functions_start_at_one_and_decrease", failures, total);
}

// ---------------------------------------------------------------------------
// analysis

/// Homogeneous draw with R0 in (1.0001, 1.05) for the bifurcation regime.
inline ThreeStageParams near_threshold(Rng& rng) {
  ThreeStageParams p = random_homogeneous(rng);
  return threestage::with_R0(p, Variant::slow, uniform(rng, 1.0001, 1.05));
}

/// Whether the stability of the bifurcating equilibrium and synchronous
/// 2-cycle matches the sign of a_minus. Inside the nonhyperbolic band only the
/// sign of rho - 1 is compared.
inline bool dichotomy_holds(const ThreeStageParams& p, bool* in_band = nullptr) {
  const auto rc = threestage::reduced_coefficients(p, Variant::slow);
  const auto bd = threestage::bifurcation_data(rc);
  const StateMap map = threestage::reduced_map(p, Variant::slow);
  analysis::SolverOptions opts;
  opts.burn_in = 0;
  const auto eq = analysis::find_equilibrium(
      map, threestage::branch_prediction(rc, threestage::equilibrium_branch_eps(rc)).equilibrium,
      in_population_domain, opts);
  const auto cyc = analysis::find_two_cycle(
      map, threestage::branch_prediction(rc, threestage::cycle_branch_eps(rc)).cycle_y2, in_population_domain, opts);
  if (!(eq.points[0].minCoeff() > 0.0 && cyc.synchronous)) return false;
  const bool band = eq.classification == analysis::Stability::nonhyperbolic ||
                    cyc.classification == analysis::Stability::nonhyperbolic;
  if (in_band) *in_band = band;
  if (band) return (eq.spectral_radius < 1.0) == (bd.a_minus < 0.0) && (cyc.spectral_radius < 1.0) == (bd.a_minus > 0.0);
  const auto want_eq = bd.a_minus < 0.0 ? analysis::Stability::stable : analysis::Stability::unstable;
  const auto want_cyc = bd.a_minus < 0.0 ? analysis::Stability::unstable : analysis::Stability::stable;
  return eq.classification == want_eq && cyc.classification == want_cyc;
}

/// The dichotomy is local: a draw whose R0 is too far from 1 is re-examined
/// on the ladder R0 - 1 -> (R0 - 1) / 10 -> ... >= 1e-6, and must hold from
/// some rung on.
inline PropertyResult branch_stability_dichotomy(Rng& rng, int draws = 50) {
  int failures = 0;
  int laddered = 0;
  int banded = 0;
  for (int n = 0; n < draws; ++n) {
    const ThreeStageParams p = near_threshold(rng);
    const double excess = threestage::inherent_R0(p, Variant::slow) - 1.0;
    try {
      bool band = false;
      if (dichotomy_holds(p, &band)) {
        banded += band;
        continue;
      }
      ++laddered;
      std::vector<bool> rungs;
      for (double e = excess / 10.0; e >= 1e-6; e /= 10.0) {
        rungs.push_back(dichotomy_holds(threestage::with_R0(p, Variant::slow, 1.0 + e)));
      }
      // Holds on a nonempty final segment of the ladder.
      const bool ok = !rungs.empty() && rungs.back() &&
                      std::is_sorted(rungs.begin(), rungs.end());  // false..false, true..true
      failures += !ok;
    } catch (const Error&) {
      ++failures;
    }
  }
  std::ostringstream os;
  os << laddered << " draws needed R0 closer to 1, " << banded << " inside the nonhyperbolic band";
  return detail::verdict("branch_stability_follows_a_minus", failures, draws, os.str());
}

inline PropertyResult rescaled_a_minus_scaling(Rng& rng, int draws = 100) {
  int failures = 0;
  for (int n = 0; n < draws; ++n) {
    const ThreeStageParams p = random_homogeneous(rng);
    const double bar = threestage::bifurcation_data(p, Variant::slow).a_minus;
    const double tilde = threestage::bifurcation_data(p, Variant::rescaled).a_minus;
    failures += !(std::abs(tilde - p.survival[1][0] * bar) <= 1e-12);
  }
  return detail::verdict("rescaled_a_minus_is_s2_times_slow", failures, draws);
}

inline PropertyResult synchrony_search_matches_predicate(Rng& rng, int draws = 200) {
  int failures = 0;
  int positives = 0;
  for (int n = 0; n < draws; ++n) {
    const ThreeStageParams p = random_homogeneous(rng);
    const auto res = analysis::dispersal_search_synchrony(p, analysis::SynchronyTarget::positive);
    positives += *res.predicate;
    failures += res.feasible_region_nonempty != *res.predicate;
  }
  std::ostringstream os;
  os << positives << " draws with the predicate true";
  return detail::verdict("synchrony_search_matches_predicate", failures, draws, os.str());
}

inline PropertyResult variant_ordering(Rng& rng, int draws = 500) {
  int failures = 0;
  for (int n = 0; n < draws; ++n) {
    ThreeStageParams p = random_params(rng);
    p.fertility[1] = p.fertility[0];
    const auto c = analysis::compare_variants(p);
    failures += !(c.R0_rescaled < c.R0_slow && c.ordering_consistent);
  }
  return detail::verdict("rescaled_R0_below_slow_R0", failures, draws);
}

// ---------------------------------------------------------------------------
// cli

inline PropertyResult rerun_reproducible() {
  cli::RunOptions opts;
  opts.fast = true;
  opts.write_files = false;
  const auto cfg = cli::builtin_config("fig10");
  const auto a = cli::run_scenario(cfg, opts).summary;
  const auto b = cli::run_scenario(cfg, opts).summary;
  double worst = 0.0;
  std::function<void(const nlohmann::json&, const nlohmann::json&)> walk = [&](const auto& x, const auto& y) {
    if (x.is_number() && y.is_number()) {
      worst = std::max(worst, std::abs(x.template get<double>() - y.template get<double>()));
    } else if (x.is_structured() && y.is_structured() && x.size() == y.size()) {
      if (x.is_array()) {
        for (std::size_t i = 0; i < x.size(); ++i) walk(x[i], y[i]);
      } else {
        for (auto it = x.begin(); it != x.end(); ++it) {
          if (!y.contains(it.key())) worst = INFINITY;
          else walk(it.value(), y[it.key()]);
        }
      }
    } else if (x != y) {
      worst = INFINITY;
    }
  };
  walk(a, b);
  std::ostringstream os;
  os << "largest difference " << worst;
  return {"rerun_reproduces_summary", worst <= 1e-9, os.str()};
}

inline std::vector<PropertyResult> run_all(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PropertyResult> out;
  out.push_back(power_decay(rng));
  out.push_back(rescaled_limit_convergence(rng));
  out.push_back(rescaled_limit_convergence(rng, 50, true));
  out.push_back(perron_agrees_with_eigensolve(rng));
  out.push_back(am_gm(rng));
  out.push_back(reduced_commutation(rng));
  out.push_back(iterate_identity(rng));
  out.push_back(spectral_link());
  out.push_back(convergence_tables_nonincreasing(rng));
  out.push_back(dispersal_conserves_totals(rng));
  out.push_back(limit_consistency(rng));
  out.push_back(nonnegativity(rng));
  out.push_back(homogeneous_variants_agree(rng));
  out.push_back(h_derivatives(rng));
  out.push_back(a_coefficient_identities(rng));
  out.push_back(extinction_threshold(rng));
  out.push_back(persistence(rng));
  out.push_back(h_monotone(rng));
  out.push_back(branch_stability_dichotomy(rng));
  out.push_back(rescaled_a_minus_scaling(rng));
  out.push_back(synchrony_search_matches_predicate(rng));
  out.push_back(variant_ordering(rng));
  out.push_back(rerun_reproducible());
  return out;
}

}  // namespace slowfast::properties
