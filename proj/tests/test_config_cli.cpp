#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spca/cli.hpp"
#include "spca/config.hpp"
#include "spca/simulation.hpp"

namespace spca {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("spca_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

void write_file(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "spca");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), err);
  if (err_text) *err_text = err.str();
  return code;
}

std::vector<ConfigIssue> grid_issues(const std::string& text) {
  std::istringstream in(text);
  try {
    grid_from_config(in);
  } catch (const ConfigError& e) {
    return e.issues();
  }
  return {};
}

const char* kGrid =
    "# reference grid\n"
    "n = 400\n"
    "p = 8\n"
    "s = 2\n"
    "delta = 0.8\n"
    "sigma1 = 4\n"
    "sigma2 = 1\n"
    "replicates = 3\n"
    "seed = 11\n";

TEST(GridConfig, ParsesListsAndDefaults) {
  std::istringstream in(
      "n = 100, 200\np = 6\ns = 1,2\ndelta = 0.5, 1\nsigma1 = 3\nsigma2 = 0.5\nreplicates = 4\nseed = 9\n"
      "lambda_rule = fixed\nlambda = 0.25\nestimator = oracle\ntheta = random\ndelta_mode = estimate\n");
  const auto g = grid_from_config(in);
  EXPECT_EQ(g.n_values, (std::vector<Index>{100, 200}));
  EXPECT_EQ(g.delta_values, (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(g.cell_count(), 8u);
  EXPECT_EQ(g.lambda.rule, LambdaRule::fixed);
  EXPECT_EQ(g.lambda.fixed_value, 0.25);
  EXPECT_EQ(g.estimator, Estimator::oracle);
  EXPECT_EQ(g.theta_mode, ThetaMode::seeded_random);
  EXPECT_TRUE(g.estimate_delta);
  EXPECT_EQ(g.root_seed, 9u);
}

TEST(GridConfig, ReportsIssuesWithLines) {
  auto issues = grid_issues("n = 10\np = 4\ns = 1\ndelta = 0\nsigma1 = 2\nsigma2 = 1\nreplicates = 1\nseed = 1\n");
  ASSERT_EQ(issues.size(), 1u);
  EXPECT_EQ(issues[0].token, "BAD_DELTA");
  EXPECT_EQ(issues[0].line, 4u);

  issues = grid_issues("n = 10\nn = 20\nbogus = 1\nfoo\n");
  std::vector<std::string> tokens;
  for (const auto& i : issues) tokens.push_back(i.token);
  EXPECT_NE(std::find(tokens.begin(), tokens.end(), "DUPLICATE_KEY"), tokens.end());
  EXPECT_NE(std::find(tokens.begin(), tokens.end(), "UNKNOWN_KEY"), tokens.end());
  EXPECT_NE(std::find(tokens.begin(), tokens.end(), "BAD_SYNTAX"), tokens.end());
  EXPECT_NE(std::find(tokens.begin(), tokens.end(), "MISSING_KEY"), tokens.end());

  issues = grid_issues(std::string(kGrid) + "C = -1\n");
  ASSERT_EQ(issues.size(), 1u);
  EXPECT_EQ(issues[0].token, "BAD_VALUE");
  issues = grid_issues("n = 10\np = 4\ns = 1\ndelta = 1\nsigma1 = 1\nsigma2 = 2\nreplicates = 1\nseed = 1\n");
  ASSERT_EQ(issues.size(), 1u);
  EXPECT_EQ(issues[0].token, "BAD_SIGMA");
}

TEST(DeviationConfig, RangesAndErrors) {
  std::istringstream ok("n = 1000\np = 6\ns = 2\ndelta = 1\nsigma1 = 4\nsigma2 = 1\nseed = 3\ns_range = 2..4\n");
  const auto d = deviation_from_config(ok);
  EXPECT_EQ(d.s_values, (std::vector<Index>{2, 3, 4}));
  std::istringstream def("n = 1000\np = 5\ns = 2\ndelta = 1\nsigma1 = 4\nsigma2 = 1\nseed = 3\n");
  EXPECT_EQ(deviation_from_config(def).s_values.size(), 5u);
  std::istringstream bad("n = 1000\np = 6\ns = 2\ndelta = 1\nsigma1 = 4\nsigma2 = 1\nseed = 3\ns_range = 1..7\n");
  try {
    deviation_from_config(bad);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.issues().at(0).token, "BAD_SUPPORT_RANGE");
  }
}

TEST(CliFit, FullyObservedTakesUndebiasedPath) {
  TempDir dir;
  const auto x = sample_gaussian(build_spiked(SpikedModel(make_sparse_theta(4, 1, ThetaMode::flat), 5.0, 1.0)), 40, 3);
  std::ofstream(dir.file("in.csv")) << [&] {
    std::ostringstream s;
    write_masked_csv(s, MaskedSample::fully_observed(x));
    return s.str();
  }();
  std::string err;
  ASSERT_EQ(run_cli({"fit", "--input", dir.file("in.csv"), "--output", dir.file("out.json")}, &err), 0) << err;
  const auto j = nlohmann::json::parse(read_file(dir.file("out.json")));
  EXPECT_EQ(j["delta"]["value"].get<double>(), 1.0);
  EXPECT_EQ(j["delta"]["mode"], "estimate");
  EXPECT_FALSE(j["debiased"].get<bool>());
  EXPECT_EQ(j["solver"]["used"], "exact");
  EXPECT_EQ(j["estimate"]["support"], nlohmann::json::array({0}));

  // The undebiased path means the reported spectrum is that of the plain covariance.
  const auto plain = spectral_summary(empirical_covariance(MaskedSample::fully_observed(x)), 1);
  EXPECT_DOUBLE_EQ(j["sigma_hat_1"].get<double>(), plain.eigenvalues[0]);
}

TEST(CliFit, RecoversSupportOfSeededSpikedFixture) {
  TempDir dir;
  const Index p = 10, n = 2000;
  const auto theta = make_sparse_theta(p, 3, ThetaMode::seeded_random, 2718);
  const SpikedModel model(theta, 4.0, 1.0);
  const auto sample = apply_mask(sample_gaussian(build_spiked(model), n, 31), 0.8, 32);
  {
    std::ofstream out(dir.file("fixture.csv"));
    write_masked_csv(out, sample);
  }
  std::string err;
  ASSERT_EQ(run_cli({"fit", "--input", dir.file("fixture.csv"), "--output", dir.file("fit.json"), "--lambda-rule",
                     "data_driven"},
                    &err),
            0)
      << err;
  const auto text = read_file(dir.file("fit.json"));
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j["estimate"]["support"].get<std::vector<Index>>(), theta.support());
  EXPECT_TRUE(j["debiased"].get<bool>());
  EXPECT_NEAR(j["delta"]["value"].get<double>(), 0.8, 0.01);
  for (const char* key : {"lambda", "sbar", "objective", "sigma_hat_1", "sigma_hat_2", "effective_rank", "diagnostics"})
    EXPECT_TRUE(j.contains(key)) << key;
  // Re-serializing the parsed result reproduces the file byte for byte.
  EXPECT_EQ(j.dump(2) + "\n", text);
}

TEST(CliFit, InputErrors) {
  TempDir dir;
  write_file(dir.file("empty.csv"), "");
  std::string err;
  EXPECT_EQ(run_cli({"fit", "--input", dir.file("empty.csv"), "--output", dir.file("o.json")}, &err), 2);
  EXPECT_EQ(err.rfind("error PARSE_ERROR:", 0), 0u) << err;
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);

  EXPECT_EQ(run_cli({"fit", "--input", dir.file("missing.csv"), "--output", dir.file("o.json")}), 2);

  write_file(dir.file("one_row.csv"), "1,2,3\n");
  EXPECT_EQ(run_cli({"fit", "--input", dir.file("one_row.csv"), "--output", dir.file("o.json")}, &err), 2);
  EXPECT_NE(err.find("TOO_FEW_ROWS"), std::string::npos);

  write_file(dir.file("ok.csv"), "1,2\n3,1\n0,5\n2,2\n4,1\n1,0\n");
  EXPECT_EQ(run_cli({"fit", "--input", dir.file("ok.csv"), "--output", dir.file("o.json"), "--delta", "1.5"}, &err), 2);
  EXPECT_NE(err.find("BAD_DELTA"), std::string::npos);
  EXPECT_EQ(run_cli({"fit", "--input", dir.file("ok.csv"), "--output", dir.file("o.json"), "--lambda-rule",
                     "theoretical"},
                    &err),
            2);
  EXPECT_NE(err.find("MISSING_SIGMA"), std::string::npos);
  EXPECT_EQ(run_cli({"fit", "--input", dir.file("ok.csv"), "--output", dir.file("o.json"), "--sbar", "9"}, &err), 2);
  EXPECT_NE(err.find("BAD_SBAR"), std::string::npos);
  EXPECT_EQ(run_cli({"fit", "--input", dir.file("ok.csv"), "--output", dir.file("o.json"), "--solver",
                     "truncated_power", "--sbar", "unconstrained"},
                    &err),
            2);
  EXPECT_NE(err.find("MISSING_SEED"), std::string::npos);
  EXPECT_EQ(run_cli({"fit", "--bogus"}), 2);
  EXPECT_EQ(run_cli({}), 2);
}

TEST(CliFit, DegenerateInputs) {
  TempDir dir;
  write_file(dir.file("hole.csv"), "a,b,c\n1,,2\n3,NA,1\n0,nan,5\n2,,2\n");
  std::string err;
  EXPECT_EQ(run_cli({"fit", "--input", dir.file("hole.csv"), "--output", dir.file("o.json")}, &err), 3);
  EXPECT_NE(err.find("ALL_MISSING_COLUMN"), std::string::npos);

  // Alternating unit rows give a covariance of 0.5 I, which has no spectral gap.
  std::ostringstream iso;
  for (int i = 0; i < 8; ++i) iso << (i % 2 ? "1,0\n" : "0,1\n");
  write_file(dir.file("iso.csv"), iso.str());
  EXPECT_EQ(run_cli({"fit", "--input", dir.file("iso.csv"), "--output", dir.file("o.json"), "--sbar", "2"}, &err), 3);
  EXPECT_NE(err.find("ZERO_SPECTRAL_GAP"), std::string::npos);
}

TEST(CliFit, FixedLambdaTruncatedPowerWithSeed) {
  TempDir dir;
  const auto theta = make_sparse_theta(30, 3, ThetaMode::flat);
  const auto x = sample_gaussian(build_spiked(SpikedModel(theta, 6.0, 1.0)), 400, 5);
  {
    std::ofstream out(dir.file("in.csv"));
    write_masked_csv(out, apply_mask(x, 0.9, 6));
  }
  std::string err;
  const std::vector<std::string> args = {"fit",      "--input",  dir.file("in.csv"),  "--output",
                                         dir.file("a.json"), "--solver", "truncated_power", "--seed",
                                         "17",      "--lambda-rule", "fixed",  "--lambda",
                                         "0.2",     "--sbar",   "unconstrained", "--threads", "2"};
  ASSERT_EQ(run_cli(args, &err), 0) << err;
  auto again = args;
  again[4] = dir.file("b.json");
  ASSERT_EQ(run_cli(again, &err), 0) << err;
  EXPECT_EQ(read_file(dir.file("a.json")), read_file(dir.file("b.json")));
  const auto j = nlohmann::json::parse(read_file(dir.file("a.json")));
  EXPECT_EQ(j["solver"]["used"], "truncated_power");
  EXPECT_EQ(j["lambda"]["rule"], "fixed:0.2");
  EXPECT_TRUE(j["sbar"]["value"].is_null());
  EXPECT_EQ(j["estimate"]["support"].get<std::vector<Index>>(), theta.support());
}

TEST(CliSimulate, OneCellAndDeterminism) {
  TempDir dir;
  write_file(dir.file("grid.cfg"),
             "n = 300\np = 6\ns = 2\ndelta = 0.9\nsigma1 = 4\nsigma2 = 1\nreplicates = 1\nseed = 5\n");
  std::string err;
  ASSERT_EQ(run_cli({"simulate", "--config", dir.file("grid.cfg"), "--output", dir.file("a.csv")}, &err), 0) << err;
  EXPECT_NE(err.find("cell 1/1"), std::string::npos);
  const auto a = read_file(dir.file("a.csv"));
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 2);
  ASSERT_EQ(run_cli({"simulate", "--config", dir.file("grid.cfg"), "--output", dir.file("b.csv"), "--metadata",
                     dir.file("meta.json")}),
            0);
  EXPECT_EQ(a, read_file(dir.file("b.csv")));
  EXPECT_EQ(read_file(dir.file("a.csv.json")), read_file(dir.file("meta.json")));
  const auto meta = nlohmann::json::parse(read_file(dir.file("meta.json")));
  EXPECT_EQ(meta["root_seed"], 5);
  EXPECT_EQ(meta["lambda_rule"], "theoretical");
}

TEST(CliSimulate, ConfigErrors) {
  TempDir dir;
  write_file(dir.file("bad.cfg"), "n = 300\np = 6\ns = 2\ndelta = 0\nsigma1 = 4\nsigma2 = 1\nreplicates = 1\nseed = 5\n");
  std::string err;
  EXPECT_EQ(run_cli({"simulate", "--config", dir.file("bad.cfg"), "--output", dir.file("a.csv")}, &err), 2);
  EXPECT_EQ(err.rfind("error BAD_DELTA: line 4:", 0), 0u) << err;
  EXPECT_FALSE(fs::exists(dir.file("a.csv")));
  EXPECT_EQ(run_cli({"simulate", "--config", dir.file("nope.cfg"), "--output", dir.file("a.csv")}), 2);
}

TEST(CliSimulate, FailedCellsKeepExitZero) {
  TempDir dir;
  write_file(dir.file("grid.cfg"),
             "n = 4, 300\np = 6\ns = 2\ndelta = 1\nsigma1 = 4\nsigma2 = 1\nreplicates = 2\nseed = 5\n");
  std::string err;
  ASSERT_EQ(run_cli({"simulate", "--config", dir.file("grid.cfg"), "--output", dir.file("a.csv")}, &err), 0);
  EXPECT_NE(read_file(dir.file("a.csv")).find(",failed,"), std::string::npos);
}

TEST(CliDeviation, RowsAndErrors) {
  TempDir dir;
  write_file(dir.file("dev.cfg"), "n = 2000\np = 6\ns = 2\ndelta = 1\nsigma1 = 4\nsigma2 = 1\nseed = 8\ns_range = 1..6\n");
  std::string err;
  ASSERT_EQ(run_cli({"deviation", "--config", dir.file("dev.cfg"), "--output", dir.file("d.csv")}, &err), 0) << err;
  const auto csv = read_file(dir.file("d.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_TRUE(fs::exists(dir.file("d.csv.json")));

  write_file(dir.file("big_s.cfg"), "n = 2000\np = 6\ns = 2\ndelta = 1\nsigma1 = 4\nsigma2 = 1\nseed = 8\ns_range = 5..7\n");
  EXPECT_EQ(run_cli({"deviation", "--config", dir.file("big_s.cfg"), "--output", dir.file("e.csv")}, &err), 2);
  EXPECT_NE(err.find("BAD_SUPPORT_RANGE"), std::string::npos);

  write_file(dir.file("budget.cfg"), "n = 50\np = 40\ns = 2\ndelta = 1\nsigma1 = 4\nsigma2 = 1\nseed = 8\ns_range = 20\n");
  EXPECT_EQ(run_cli({"deviation", "--config", dir.file("budget.cfg"), "--output", dir.file("f.csv")}, &err), 3);
  EXPECT_NE(err.find("BUDGET_EXCEEDED"), std::string::npos);
}

TEST(CliDeviation, LargeSampleRatiosBelowPilotCeiling) {
  TempDir dir;
  std::ifstream fixture(std::string(SPCA_FIXTURE_DIR) + "/pilot.json");
  const double ceiling = nlohmann::json::parse(fixture)["deviation"]["ratio_ceiling"].get<double>();
  std::string err;
  ASSERT_EQ(run_cli({"deviation", "--config", std::string(SPCA_CONFIG_DIR) + "/deviation.cfg", "--output",
                     dir.file("d.csv")},
                    &err),
            0)
      << err;
  std::istringstream csv(read_file(dir.file("d.csv")));
  std::string line;
  std::getline(csv, line);
  int rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> fields;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
    ASSERT_EQ(fields.size(), 6u);
    EXPECT_LT(std::stod(fields[4]), ceiling) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 6);
}

}  // namespace
}  // namespace spca
