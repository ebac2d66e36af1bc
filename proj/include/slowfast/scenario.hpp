#pragma once

// Scenario execution: simulations, orbit verdicts, trajectory CSVs and the
// JSON run summary.

#include "slowfast/aggregation.hpp"
#include "slowfast/analysis.hpp"
#include "slowfast/config.hpp"
#include "slowfast/metapop.hpp"
#include "slowfast/threestage.hpp"

#include <json.hpp>

#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace slowfast::cli {

using nlohmann::json;
using analysis::OrbitReport;

struct Check {
  std::string name;
  bool passed;
  std::string detail;
};

struct RunOptions {
  bool fast = false;
  std::optional<int> tail;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = "out";
  bool write_files = true;
};

struct RunResult {
  json summary;
  std::vector<Check> checks;
  std::vector<std::filesystem::path> files;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
};

/// The last `tail` states of an orbit of `horizon` steps; t runs from
/// horizon - tail + 1 to horizon.
struct Tail {
  long first_t = 0;
  std::vector<Vector> states;
};

inline Tail simulate_tail(const StateMap& map, const Vector& x0, long horizon, int tail,
                          const DomainPredicate& domain = in_population_domain) {
  if (!domain(x0)) throw Error(ErrorCode::domain_exit, "initial state outside the domain");
  std::deque<Vector> window{x0};
  Vector x = x0;
  for (long t = 1; t <= horizon; ++t) {
    x = map(x);
    if (!domain(x)) throw Error(ErrorCode::domain_exit, "orbit left the domain at t = " + std::to_string(t));
    window.push_back(x);
    if (static_cast<int>(window.size()) > tail) window.pop_front();
  }
  return {horizon - static_cast<long>(window.size()) + 1, {window.begin(), window.end()}};
}

/// Burn-in from `start`, then Newton on map^2; a collapse to a single point
/// is re-solved as an equilibrium from the same burned-in state.
struct OrbitOutcome {
  std::optional<OrbitReport> report;
  std::string error;
};

inline constexpr long kOrbitBurnIn = 10000;

inline OrbitOutcome locate_orbit(const StateMap& map, const Vector& start, long burn_in = kOrbitBurnIn) {
  analysis::SolverOptions opts;
  opts.burn_in = 0;
  Vector y = start;
  try {
    for (long t = 0; t < burn_in; ++t) y = map(y);
    if (!in_population_domain(y)) return {std::nullopt, "burn-in orbit left the domain"};
    return {analysis::find_two_cycle(map, y, in_population_domain, opts), ""};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::collapsed_to_equilibrium && e.code() != ErrorCode::no_convergence) {
      return {std::nullopt, e.what()};
    }
  }
  try {
    return {analysis::find_equilibrium(map, y, in_population_domain, opts), ""};
  } catch (const Error& e) {
    return {std::nullopt, e.what()};
  }
}

// ---------------------------------------------------------------------------
// JSON helpers

inline json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json to_json(const std::vector<Vector>& vs) {
  json out = json::array();
  for (const auto& v : vs) out.push_back(to_json(v));
  return out;
}

inline json to_json(const ThreeStageParams& p) {
  json j;
  for (int i = 0; i < 3; ++i) {
    for (int a = 0; a < 2; ++a) j["s" + std::to_string(i + 1) + "_" + std::to_string(a + 1)] = p.survival[i][a];
  }
  for (int a = 0; a < 2; ++a) {
    const std::string s = "_" + std::to_string(a + 1);
    j["phi" + s] = p.fertility[a];
    j["c" + s] = p.fertility_crowding[a];
    j["d" + s] = p.activation_crowding[a];
  }
  for (int i = 0; i < 3; ++i) {
    j["v" + std::to_string(i + 1) + "_1"] = p.perron_fraction[i];
    j["theta_" + std::to_string(i + 1)] = p.mixing[i];
  }
  return j;
}

inline json to_json(const OrbitReport& r) {
  return {{"kind", std::string(analysis::to_string(r.kind))},
          {"points", to_json(r.points)},
          {"residual", r.residual},
          {"spectral_radius", r.spectral_radius},
          {"classification", std::string(analysis::to_string(r.classification))},
          {"synchronous", r.synchronous}};
}

inline json to_json(const OrbitOutcome& o) {
  if (o.report) return to_json(*o.report);
  return {{"error", o.error}};
}

inline json to_json(const analysis::VariantComparison& c) {
  return {{"R0_slow", c.R0_slow},
          {"R0_rescaled", c.R0_rescaled},
          {"a_minus_slow", c.a_minus_slow},
          {"a_minus_rescaled", c.a_minus_rescaled},
          {"ordering", std::string(analysis::to_string(c.ordering))},
          {"extinction_flip", c.extinction_flip},
          {"ordering_consistent", c.ordering_consistent}};
}

inline json scalar_table(const ThreeStageParams& p) {
  json j;
  for (Variant v : {Variant::slow, Variant::rescaled}) {
    const auto bd = threestage::bifurcation_data(p, v);
    j[std::string(to_string(v))] = {
        {"R0", bd.R0}, {"c_w", bd.c_w}, {"c_b", bd.c_b}, {"a_plus", bd.a_plus}, {"a_minus", bd.a_minus}};
  }
  json local = json::array();
  for (int a = 0; a < 2; ++a) {
    const auto lq = threestage::local_quantities(p, a);
    local.push_back({{"patch", a + 1}, {"R0", lq.R0}, {"a_minus", lq.a_minus}});
  }
  j["local"] = local;
  return j;
}

// ---------------------------------------------------------------------------
// CSV output

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const std::string& header) : path_(path), out_(path) {
    if (!out_) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
    out_ << header << '\n';
    out_ << std::setprecision(12);
  }

  template <typename... Lead>
  void row(const Vector& values, Lead... lead) {
    ((out_ << lead << ','), ...);
    for (Index i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << values(i);
    out_ << '\n';
    if (!out_) throw Error(ErrorCode::io_failure, "write failed on " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline constexpr const char* kCompleteHeader = "t,k,x1_1,x1_2,x2_1,x2_2,x3_1,x3_2,y1,y2,y3";
inline constexpr const char* kReducedHeader = "t,y1,y2,y3";
inline constexpr const char* kLocalHeader = "t,patch,y1,y2,y3";

namespace detail {

inline Vector global_state(const Vector& x) { return aggregate(x, 3, 2); }

inline Vector patch_state(const Vector& x, int patch) {
  Vector y(3);
  y << x(patch), x(2 + patch), x(4 + patch);
  return y;
}

inline double total(const Vector& v) { return v.sum(); }

inline void expect_orbit(std::vector<Check>& checks, const std::string& name, const OrbitOutcome& o,
                         analysis::OrbitKind kind, bool require_synchrony) {
  std::ostringstream os;
  bool ok = false;
  if (!o.report) {
    os << "no orbit located (" << o.error << ")";
  } else {
    const auto& r = *o.report;
    ok = r.kind == kind && r.residual <= analysis::kOrbitResidual;
    if (kind == analysis::OrbitKind::equilibrium) ok = ok && r.points[0].minCoeff() > 0.0;
    if (require_synchrony && kind == analysis::OrbitKind::two_cycle) ok = ok && r.synchronous;
    os << "found " << analysis::to_string(r.kind) << ", residual " << r.residual << ", rho "
       << r.spectral_radius << ", " << analysis::to_string(r.classification)
       << (r.synchronous ? ", synchronous" : "");
  }
  checks.push_back({name, ok, os.str()});
}

/// Random positive perturbations of x0 for the convergence table.
inline std::vector<Vector> convergence_samples(const Vector& x0, std::uint64_t seed, int count = 4) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> factor(0.5, 1.5);
  std::vector<Vector> samples{x0};
  for (int i = 0; i < count; ++i) {
    Vector x = x0;
    for (Index j = 0; j < x.size(); ++j) x(j) *= factor(rng);
    samples.push_back(x);
  }
  return samples;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenario kinds

namespace detail {

struct Context {
  const ScenarioConfig& cfg;
  const RunOptions& opts;
  long horizon;
  int tail;
  std::uint64_t seed;
  RunResult& result;

  std::filesystem::path file(const std::string& name) {
    result.files.push_back(opts.out_dir / name);
    return opts.out_dir / name;
  }
};

// Complete system for each k, with distances to the reduced tail.
inline void run_complete_series(Context& ctx, const Tail& reduced) {
  const auto& cfg = ctx.cfg;
  const TwoScaleSystem sys = threestage::two_scale_system(cfg.params, cfg.variant);
  json series = json::array();
  std::optional<CsvFile> csv;
  if (ctx.opts.write_files) csv.emplace(ctx.file("complete.csv"), kCompleteHeader);

  double reduced_mean = 0.0;
  for (const auto& y : reduced.states) reduced_mean += total(y);
  reduced_mean /= static_cast<double>(reduced.states.size());

  std::vector<double> distances;
  for (int k : cfg.k_list) {
    const StateMap step = [&sys, k](const Vector& x) { return sys.complete(k, x); };
    const Tail tail = simulate_tail(step, cfg.x0, ctx.horizon, ctx.tail);
    double dist = 0.0;
    for (std::size_t i = 0; i < tail.states.size(); ++i) {
      dist += std::abs(total(tail.states[i]) - total(reduced.states[i]));
    }
    dist /= static_cast<double>(tail.states.size());
    distances.push_back(dist);
    if (csv) {
      for (std::size_t i = 0; i < tail.states.size(); ++i) {
        Vector row(9);
        row << tail.states[i], global_state(tail.states[i]);
        csv->row(row, tail.first_t + static_cast<long>(i), k);
      }
    }
    json entry = {{"k", k},
                  {"tail", to_json(tail.states)},
                  {"mean_tail_distance", dist},
                  {"relative_distance", dist / reduced_mean},
                  {"orbit", to_json(locate_orbit(step, tail.states.back()))}};
    series.push_back(entry);
  }
  ctx.result.summary["complete"] = series;

  const auto samples = convergence_samples(cfg.x0, ctx.seed);
  json table = json::array();
  for (const auto& row : convergence_table(sys, samples, 1, cfg.k_list)) {
    table.push_back({{"k", row.k}, {"gap", row.gap}, {"failed", row.failed}});
  }
  ctx.result.summary["convergence_table"] = table;

  if (cfg.expect.k_convergence) {
    bool decreasing = true;
    std::ostringstream os;
    for (std::size_t i = 0; i < distances.size(); ++i) {
      os << (i ? ", " : "") << "k=" << cfg.k_list[i] << ": " << distances[i];
      if (i > 0 && !(distances[i] < distances[i - 1])) decreasing = false;
    }
    ctx.result.checks.push_back({"complete_tail_distance_decreasing_in_k", decreasing, os.str()});
  }
  if (cfg.expect.max_relative_distance) {
    const double rel = distances.back() / reduced_mean;
    std::ostringstream os;
    os << "k=" << cfg.k_list.back() << ": relative distance " << rel << " (bound "
       << *cfg.expect.max_relative_distance << ")";
    ctx.result.checks.push_back({"complete_tail_relative_distance", rel < *cfg.expect.max_relative_distance, os.str()});
  }
}

inline Tail run_reduced(Context& ctx, Variant variant, const std::string& csv_name, const std::string& key) {
  const auto& cfg = ctx.cfg;
  const StateMap map = threestage::reduced_map(cfg.params, variant);
  const Tail tail = simulate_tail(map, global_state(cfg.x0), ctx.horizon, ctx.tail);
  if (ctx.opts.write_files) {
    CsvFile csv(ctx.file(csv_name), kReducedHeader);
    for (std::size_t i = 0; i < tail.states.size(); ++i) csv.row(tail.states[i], tail.first_t + static_cast<long>(i));
  }
  ctx.result.summary[key]["tail"] = to_json(tail.states);
  // Distinguishes a slowly damped alternation from a true 2-cycle.
  const auto& st = tail.states;
  if (st.size() >= 3) ctx.result.summary[key]["tail_period2_residual"] = (st.back() - st[st.size() - 3]).norm();
  return tail;
}

inline void run_complete_vs_reduced(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Tail reduced = run_reduced(ctx, cfg.variant, "reduced.csv", "reduced");
  const OrbitOutcome orbit = locate_orbit(threestage::reduced_map(cfg.params, cfg.variant), reduced.states.back());
  ctx.result.summary["reduced"]["orbit"] = to_json(orbit);
  if (cfg.expect.reduced) expect_orbit(ctx.result.checks, "reduced_orbit", orbit, *cfg.expect.reduced, false);
  run_complete_series(ctx, reduced);
}

inline void run_local_vs_global(Context& ctx) {
  const auto& cfg = ctx.cfg;
  json local = json::array();
  std::optional<CsvFile> csv;
  if (ctx.opts.write_files) csv.emplace(ctx.file("local.csv"), kLocalHeader);
  for (int a = 0; a < 2; ++a) {
    const StateMap map = threestage::local_map(cfg.params, a);
    const Tail tail = simulate_tail(map, patch_state(cfg.x0, a), ctx.horizon, ctx.tail);
    if (csv) {
      for (std::size_t i = 0; i < tail.states.size(); ++i) csv->row(tail.states[i], tail.first_t + static_cast<long>(i), a + 1);
    }
    const OrbitOutcome orbit = locate_orbit(map, tail.states.back());
    local.push_back({{"patch", a + 1}, {"tail", to_json(tail.states)}, {"orbit", to_json(orbit)}});
    if (cfg.expect.local) {
      expect_orbit(ctx.result.checks, "local_orbit_patch_" + std::to_string(a + 1), orbit, *cfg.expect.local, true);
    }
  }
  ctx.result.summary["local"] = local;

  const Tail reduced = run_reduced(ctx, cfg.variant, "reduced.csv", "reduced");
  const StateMap map = threestage::reduced_map(cfg.params, cfg.variant);
  const OrbitOutcome orbit = locate_orbit(map, reduced.states.back());
  ctx.result.summary["reduced"]["orbit"] = to_json(orbit);
  if (cfg.expect.reduced) expect_orbit(ctx.result.checks, "global_orbit", orbit, *cfg.expect.reduced, true);

  // The positive equilibrium near the bifurcation, whatever its stability.
  const auto rc = threestage::reduced_coefficients(cfg.params, cfg.variant);
  const double eps = threestage::equilibrium_branch_eps(rc);
  if (eps > 0.0 && std::isfinite(eps)) {
    OrbitOutcome eq;
    try {
      eq.report = analysis::find_equilibrium(map, threestage::branch_prediction(rc, eps).equilibrium);
    } catch (const Error& e) {
      eq.error = e.what();
    }
    ctx.result.summary["reduced"]["positive_equilibrium"] = to_json(eq);
  }
  run_complete_series(ctx, reduced);
}

// Parameters of the reversed-ordering example; alpha scales the patch-2
// fertility. `alternative_reading` selects the alternative reading of the survivals.
inline ThreeStageParams reversal_params(double alpha, bool alternative_reading) {
  ThreeStageParams p = ThreeStageParams::homogeneous(0.5, 0.5, 0.8, 1.0, 1.0, 5.0, {0.5, 0.5, 0.5});
  if (alternative_reading) {
    p.survival[0] = {0.7, 0.7};
  } else {
    p.survival[1] = {0.7, 0.5};
  }
  p.fertility = {1.0, alpha};
  return p;
}

inline double reversal_threshold_closed_form() { return (65.0 * std::sqrt(35.0) + 14.0) / 289.0; }

/// alpha at which both R0 agree; the difference is affine in alpha.
inline std::optional<double> reversal_threshold(bool alternative_reading) {
  auto diff = [alternative_reading](double alpha) {
    const auto c = analysis::compare_variants(reversal_params(alpha, alternative_reading));
    return c.R0_rescaled - c.R0_slow;
  };
  const double d0 = diff(1.0);
  const double d1 = diff(2.0);
  if (std::abs(d1 - d0) < 1e-14) return std::nullopt;
  return 1.0 - d0 / (d1 - d0);
}

inline void run_variant_comparison(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto cmp = analysis::compare_variants(cfg.params);
  ctx.result.summary["comparison"] = to_json(cmp);
  ctx.result.checks.push_back({"ordering_consistent", cmp.ordering_consistent,
                               std::string("ordering ") + std::string(analysis::to_string(cmp.ordering))});

  const Tail slow = run_reduced(ctx, Variant::slow, "reduced_slow.csv", "reduced_slow");
  const Tail resc = run_reduced(ctx, Variant::rescaled, "reduced_rescaled.csv", "reduced_rescaled");
  const double slow_total = total(slow.states.back());
  const double resc_total = total(resc.states.back());
  ctx.result.summary["final_totals"] = {{"slow_survival", slow_total}, {"rescaled", resc_total}};
  if (cmp.extinction_flip) {
    const bool rescaled_dies = cmp.R0_rescaled < 1.0;
    const double dying = rescaled_dies ? resc_total : slow_total;
    const double living = rescaled_dies ? slow_total : resc_total;
    std::ostringstream os;
    os << "extinct variant total " << dying << " (< 1e-6), persistent variant total " << living << " (> 1e-3)";
    ctx.result.checks.push_back({"extinction_flip_simulated", dying < 1e-6 && living > 1e-3, os.str()});
  }

  if (cfg.reversal_example) {
    json rev;
    const double closed = reversal_threshold_closed_form();
    rev["threshold_closed_form"] = closed;
    json readings = json::array();
    for (bool alt : {false, true}) {
      json r;
      r["reading"] = alt ? "s1 = 0.7 in both patches" : "s2 = (0.7, 0.5)";
      const auto thr = reversal_threshold(alt);
      r["threshold"] = thr ? json(*thr) : json(nullptr);
      json at = json::array();
      for (double alpha : {1.2, 1.5}) {
        json e = to_json(analysis::compare_variants(reversal_params(alpha, alt)));
        e["alpha"] = alpha;
        at.push_back(e);
      }
      r["comparisons"] = at;
      readings.push_back(r);
      if (!alt) {
        const bool ok = thr && std::abs(*thr - closed) < 1e-9;
        std::ostringstream os;
        os << "numeric " << (thr ? *thr : NAN) << " vs closed form " << closed;
        ctx.result.checks.push_back({"reversal_threshold_reproduced", ok, os.str()});
        const auto above = analysis::compare_variants(reversal_params(closed + 0.1, alt));
        ctx.result.checks.push_back({"reversal_above_threshold", above.ordering == analysis::Ordering::rescaled_above,
                                     std::string(analysis::to_string(above.ordering))});
      }
    }
    rev["readings"] = readings;
    ctx.result.summary["reversal_example"] = rev;
  }
}

}  // namespace detail

inline RunResult run_scenario(const ScenarioConfig& config, const RunOptions& opts = {}) {
  ScenarioConfig cfg = config;
  if (opts.tail) cfg.tail = *opts.tail;
  if (opts.seed) cfg.seed = *opts.seed;
  const long horizon = opts.fast ? std::max(1L, cfg.horizon / 100) : cfg.horizon;
  if (cfg.tail > horizon + 1) throw config_error("run.tail", "exceeds the number of simulated states");
  validate(cfg);

  if (opts.write_files) {
    std::error_code ec;
    std::filesystem::create_directories(opts.out_dir, ec);
    if (ec) throw Error(ErrorCode::io_failure, "cannot create " + opts.out_dir.string() + ": " + ec.message());
  }

  RunResult result;
  json& s = result.summary;
  s["scenario"] = cfg.name;
  s["kind"] = std::string(to_string(cfg.kind));
  s["variant"] = std::string(to_string(cfg.variant));
  s["fast"] = opts.fast;
  s["horizon"] = horizon;
  s["tail"] = cfg.tail;
  s["seed"] = cfg.seed;
  s["k_list"] = cfg.k_list;
  s["initial_state"] = to_json(cfg.x0);
  s["params"] = to_json(cfg.params);
  s["scalars"] = scalar_table(cfg.params);

  detail::Context ctx{cfg, opts, horizon, cfg.tail, cfg.seed, result};
  switch (cfg.kind) {
    case ScenarioKind::complete_vs_reduced: detail::run_complete_vs_reduced(ctx); break;
    case ScenarioKind::local_vs_global: detail::run_local_vs_global(ctx); break;
    case ScenarioKind::variant_comparison: detail::run_variant_comparison(ctx); break;
  }

  json checks = json::array();
  for (const auto& c : result.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  s["checks"] = checks;
  s["passed"] = result.passed();

  if (opts.write_files) {
    const auto path = opts.out_dir / "summary.json";
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
    out << std::setprecision(17) << s.dump(2) << '\n';
    result.files.push_back(path);
  }
  return result;
}

}  // namespace slowfast::cli
