#include "slowfast/properties.hpp"
#include "slowfast/scenario.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace slowfast;
using namespace slowfast::cli;
namespace fs = std::filesystem;

namespace {

const char* kValid = R"(
[model]
variant = "rescaled"   # comment
kind = "complete_vs_reduced"
[params]
s1_1 = 0.5
s1_2 = 0.5
s2_1 = 0.5
s2_2 = 0.5
s3_1 = 0.5
s3_2 = 0.5
phi_1 = 3.1
phi_2 = 3.1
c_1 = 1
c_2 = 1
d_1 = 10
d_2 = 10
[dispersal]
v1_1 = 0.3
v2_1 = 0.875
v3_1 = 0.125
theta_2 = "max"
[run]
k_list = [1, 3]
horizon = 50
tail = 5
seed = 3
[init]
x = [0.02, 0.02, 0.05, 0.05, 0.02, 0.02]
)";

ScenarioConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test");
}

std::string replaced(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return text.replace(pos, from.size(), to);
}

std::string config_field_error(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config_invalid);
    return e.what();
  }
  ADD_FAILURE() << "config accepted";
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("slowfast_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::size_t data_rows(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::size_t n = 0;
  std::getline(in, line);
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SLOWFAST_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesValidFile) {
  const auto cfg = parse(kValid);
  EXPECT_EQ(cfg.variant, Variant::rescaled);
  EXPECT_EQ(cfg.k_list, (std::vector<int>{1, 3}));
  EXPECT_EQ(cfg.horizon, 50);
  EXPECT_EQ(cfg.tail, 5);
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_DOUBLE_EQ(cfg.params.mixing[1], 0.999 / 0.875);
  EXPECT_DOUBLE_EQ(cfg.params.mixing[0], 0.9);
}

TEST(Config, RejectsUnknownKey) {
  EXPECT_NE(config_field_error(replaced(kValid, "seed = 3", "seed = 3\nsed = 4")).find("run.sed"), std::string::npos);
}

TEST(Config, RejectsMissingKey) {
  EXPECT_NE(config_field_error(replaced(kValid, "d_2 = 10", "")).find("params.d_2"), std::string::npos);
}

TEST(Config, RejectsMalformedValues) {
  config_field_error(replaced(kValid, "phi_1 = 3.1", "phi_1 = three"));
  config_field_error(replaced(kValid, "k_list = [1, 3]", "k_list = [1, 2.5]"));
  config_field_error(replaced(kValid, "k_list = [1, 3]", "k_list = [0]"));
  config_field_error(replaced(kValid, "variant = \"rescaled\"", "variant = rescaled"));
  config_field_error(replaced(kValid, "kind = \"complete_vs_reduced\"", "kind = \"other\""));
  config_field_error(replaced(kValid, "tail = 5", "tail = 500"));
  config_field_error(replaced(kValid, "x = [0.02, 0.02, 0.05, 0.05, 0.02, 0.02]", "x = [0.02, 0.02]"));
  config_field_error(replaced(kValid, "x = [0.02, 0.02, 0.05, 0.05, 0.02, 0.02]", "x = [0, 0, 0, 0, 0, 0]"));
  config_field_error(replaced(kValid, "s2_1 = 0.5", "s2_1 = 1.5"));
  config_field_error(replaced(kValid, "[model]", "[model]\nq = 4"));
  config_field_error(std::string("stray = 1\n") + kValid);
}

TEST(Config, ShippedFilesParse) {
  for (const auto& entry : fs::directory_iterator(SLOWFAST_CONFIG_DIR)) {
    EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
  }
}

TEST(Config, ShippedFig10MatchesBuiltin) {
  const auto file = load_config(fs::path(SLOWFAST_CONFIG_DIR) / "fig10.toml");
  const auto builtin = builtin_config("fig10");
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(file.params.mixing[i], builtin.params.mixing[i]);
  EXPECT_EQ(file.k_list, builtin.k_list);
}

TEST(Config, MissingFileIsIoFailure) {
  try {
    load_config("/nonexistent/x.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io_failure);
  }
  EXPECT_THROW(resolve_scenario("no_such_scenario"), Error);
}

TEST(Scenarios, ListOrder) {
  std::vector<std::string> names;
  for (const auto& s : kScenarios) names.emplace_back(s.name);
  EXPECT_EQ(names, (std::vector<std::string>{"fig2", "fig3", "fig10", "sec42_compare", "custom"}));
  for (const auto& n : names) EXPECT_NO_THROW(validate(builtin_config(n)));
}

TEST(Run, CsvRowsFollowTailAndSeries) {
  auto cfg = parse(kValid);
  RunOptions opts;
  opts.out_dir = scratch("rows");
  opts.tail = 4;
  const auto res = run_scenario(cfg, opts);
  EXPECT_EQ(data_rows(opts.out_dir / "reduced.csv"), 4u);
  EXPECT_EQ(data_rows(opts.out_dir / "complete.csv"), 4u * cfg.k_list.size());
  EXPECT_TRUE(fs::exists(opts.out_dir / "summary.json"));
  std::ifstream in(opts.out_dir / "complete.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, kCompleteHeader);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first.substr(0, first.find(',')), "47");
}

TEST(Run, LocalCsvHasBothPatches) {
  auto cfg = builtin_config("fig2");
  RunOptions opts;
  opts.out_dir = scratch("local");
  opts.fast = true;
  opts.tail = 3;
  run_scenario(cfg, opts);
  EXPECT_EQ(data_rows(opts.out_dir / "local.csv"), 6u);
}

TEST(Run, SummaryIsReproducible) {
  auto cfg = builtin_config("custom");
  RunOptions opts;
  opts.write_files = false;
  opts.fast = true;
  const auto a = run_scenario(cfg, opts);
  const auto b = run_scenario(cfg, opts);
  EXPECT_EQ(a.summary.dump(), b.summary.dump());
  opts.seed = 99;
  const auto c = run_scenario(cfg, opts);
  EXPECT_NE(a.summary["convergence_table"].dump(), c.summary["convergence_table"].dump());
}

TEST(Run, TailLongerThanHorizonRejected) {
  auto cfg = parse(kValid);
  RunOptions opts;
  opts.write_files = false;
  opts.fast = true;
  opts.tail = 5;
  try {
    run_scenario(cfg, opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config_invalid);
  }
}

TEST(Run, VariantComparisonChecksPass) {
  RunOptions opts;
  opts.write_files = false;
  opts.fast = true;
  const auto res = run_scenario(builtin_config("sec42_compare"), opts);
  EXPECT_TRUE(res.passed());
  EXPECT_TRUE(res.summary["comparison"]["extinction_flip"].get<bool>());
}

TEST(Reversal, ThresholdMatchesClosedForm) {
  const auto thr = cli::detail::reversal_threshold(false);
  ASSERT_TRUE(thr.has_value());
  EXPECT_NEAR(*thr, cli::detail::reversal_threshold_closed_form(), 1e-9);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("list"), 0);
  EXPECT_EQ(run_cli("run no_such_scenario"), 2);
  EXPECT_EQ(run_cli("run custom --tail 0"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  const fs::path bad = scratch("badcfg");
  fs::create_directories(bad);
  std::ofstream(bad / "bad.toml") << replaced(kValid, "c_1 = 1", "c_1 = -1");
  EXPECT_EQ(run_cli("run " + (bad / "bad.toml").string() + " --out " + (bad / "out").string()), 2);
  EXPECT_EQ(run_cli("run custom --fast --out " + scratch("cli_custom").string()), 0);
}

TEST(Cli, AssertionFailureExitsOne) {
  // Homogeneous patches whose reduced run settles on an equilibrium.
  const fs::path dir = scratch("assert");
  fs::create_directories(dir);
  std::ofstream(dir / "wrong.toml") << replaced(kValid, "[init]", "[expect]\nreduced = \"two_cycle\"\n[init]");
  EXPECT_EQ(run_cli("run " + (dir / "wrong.toml").string() + " --out " + (dir / "out").string()), 1);
}

TEST(Properties, SuitesPass) {
  for (const auto& r : properties::run_all(20240611)) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}
