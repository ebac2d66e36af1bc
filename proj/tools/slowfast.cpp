// Command-line driver: run scenarios, list built-ins, run property suites.

#include "slowfast/properties.hpp"
#include "slowfast/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssertion = 1;
constexpr int kExitConfig = 2;

int exit_code_for(const slowfast::Error& e) {
  switch (e.code()) {
    case slowfast::ErrorCode::config_invalid:
    case slowfast::ErrorCode::io_failure:
    case slowfast::ErrorCode::invalid_argument:
      return kExitConfig;
    default:
      return kExitAssertion;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-time-scale metapopulation models: complete and reduced systems"};
  app.require_subcommand(1);

  std::string target;
  bool fast = false;
  int tail = 0;
  std::string out_dir;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "run a built-in scenario or a config file");
  run->add_option("scenario", target, "built-in name or config path")->required();
  run->add_flag("--fast", fast, "divide horizons by 100");
  auto* tail_opt = run->add_option("--tail", tail, "number of final states written")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "output directory (default out/<scenario>)");
  auto* seed_opt = run->add_option("--seed", seed, "seed for sampled states");

  auto* list = app.add_subcommand("list", "list built-in scenarios");

  std::uint64_t check_seed = 20240611;
  auto* check = app.add_subcommand("check", "run the property suites");
  check->add_option("--seed", check_seed, "seed for random draws");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*list) {
      for (const auto& s : slowfast::cli::kScenarios) std::cout << s.name << "\t" << s.description << "\n";
      return kExitOk;
    }

    if (*check) {
      const auto results = slowfast::properties::run_all(check_seed);
      bool ok = true;
      for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        ok = ok && r.passed;
      }
      return ok ? kExitOk : kExitAssertion;
    }

    slowfast::cli::ScenarioConfig cfg = slowfast::cli::resolve_scenario(target);
    slowfast::cli::RunOptions opts;
    opts.fast = fast;
    if (*tail_opt) opts.tail = tail;
    if (*seed_opt) opts.seed = seed;
    opts.out_dir = out_dir.empty() ? std::filesystem::path("out") / cfg.name : std::filesystem::path(out_dir);

    const auto result = slowfast::cli::run_scenario(cfg, opts);
    for (const auto& c : result.checks) {
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    }
    for (const auto& f : result.files) std::cout << "wrote " << f.string() << "\n";
    return result.passed() ? kExitOk : kExitAssertion;
  } catch (const slowfast::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAssertion;
  }
}
