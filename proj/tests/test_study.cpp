#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sdb/sdb.hpp"

using namespace sdb;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sdb_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Config, ParsesKeyValueText) {
  const auto c = parse_config(R"(
# comment line
case = zero_diff
method = galerkin   # trailing comment
mesh_sizes = 4, 8,16
theta = 1
dt_rule = proportional_h2:0.25
t_final = 0.5
c1u = 4
d_scale = 0.5
)");
  EXPECT_EQ(c.diffusion, DiffusionCase::zero);
  EXPECT_EQ(c.method, Method::galerkin);
  EXPECT_EQ(c.mesh_sizes, (std::vector<std::size_t>{4, 8, 16}));
  EXPECT_EQ(c.theta, 1.0);
  EXPECT_EQ(c.dt_rule.kind, DtRule::Kind::proportional_h2);
  EXPECT_EQ(c.dt_rule.value, 0.25);
  EXPECT_EQ(c.t_final, 0.5);
  EXPECT_EQ(c.tau.c1u, 4.0);
  EXPECT_EQ(c.resolved_d_scale(), 0.5);
}

TEST(Config, RoundTripsThroughText) {
  RunConfig c;
  c.diffusion = DiffusionCase::zero;
  c.mesh_sizes = {3, 7};
  c.dt_rule = {DtRule::Kind::fixed, 0.1 + 0.2};
  c.tau.c_mu = 1.0 / 3.0;
  c.tau.tau2_form = TauConstants::Tau2Form::generic;
  c.series = SubscaleSeries::truncated;
  c.output = "out.csv";
  c.timing = false;
  const auto back = parse_config(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.dt_rule.value, 0.1 + 0.2);
  EXPECT_EQ(back.tau.c_mu, 1.0 / 3.0);
}

TEST(Config, DtRules) {
  EXPECT_DOUBLE_EQ(parse_dt_rule("proportional_h").resolve(0.2), 0.2);
  EXPECT_DOUBLE_EQ(parse_dt_rule("proportional_h2").resolve(0.2), 0.02);
  EXPECT_DOUBLE_EQ(parse_dt_rule("fixed:0.01").resolve(0.2), 0.01);
  EXPECT_THROW(parse_dt_rule("fixed"), ConfigError);
  EXPECT_THROW(parse_dt_rule("fixed:-1"), ConfigError);
  EXPECT_THROW(parse_dt_rule("adaptive"), ConfigError);
}

TEST(Config, RejectsInvalidSettings) {
  EXPECT_THROW(parse_config("mesh_sizes = 10,5").validate(), ConfigError);
  EXPECT_THROW(parse_config("mesh_sizes = 10,10").validate(), ConfigError);
  EXPECT_THROW(parse_config("mesh_sizes = 0"), ConfigError);
  EXPECT_THROW(parse_config("theta = 0.5").validate(), ConfigError);
  EXPECT_THROW(parse_config("t_final = -1").validate(), ConfigError);
  EXPECT_THROW(parse_config("quad_degree = 9").validate(), ConfigError);
  EXPECT_THROW(parse_config("method = upwind"), ConfigError);
  EXPECT_THROW(parse_config("case = maybe"), ConfigError);
  EXPECT_THROW(parse_config("colour = red"), ConfigError);
  EXPECT_THROW(parse_config("no equals sign"), ConfigError);
  EXPECT_THROW(parse_config("sigma = abc"), ConfigError);
  EXPECT_THROW(load_config_file("/nonexistent/file.cfg"), ConfigError);
}

TEST(Config, LinearElementConstantsPreset) {
  const auto c = parse_config("tau_constants = linear");
  EXPECT_EQ(c.tau.c1u, 4.0);
  EXPECT_EQ(c.tau.c_diff, 2.25);
}

TEST(Study, SingleMeshHasNoOrder) {
  RunConfig c;
  c.diffusion = DiffusionCase::zero;
  c.mesh_sizes = {10};
  const auto r = run_study(c);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_FALSE(r.rows[0].order_c_h1.has_value());
  EXPECT_GT(r.rows[0].errors.c.h1, 0.0);
  EXPECT_TRUE(r.rows[0].estimator.has_value());
}

TEST(Study, GalerkinNonzeroDiffusionOrder) {
  RunConfig c;
  c.method = Method::galerkin;
  c.mesh_sizes = {10, 20};
  const auto r = run_study(c);
  ASSERT_EQ(r.rows.size(), 2u);
  ASSERT_TRUE(r.rows[1].order_c_h1.has_value());
  EXPECT_NEAR(*r.rows[1].order_c_h1, 1.8, 0.4);
  EXPECT_DOUBLE_EQ(*r.rows[1].order_c_h1,
                   convergence_order({r.rows[0].errors.c.h1, r.rows[1].errors.c.h1},
                                     {r.rows[0].h, r.rows[1].h})[0]);
}

TEST(Study, CsvIsByteIdenticalAndCarriesConfig) {
  const auto dir = scratch_dir("csv");
  RunConfig c;
  c.mesh_sizes = {4, 6};
  c.timing = false;
  c.output = (dir / "a.csv").string();
  run_study(c);
  const auto first = slurp(dir / "a.csv");
  run_study(c);
  EXPECT_EQ(slurp(dir / "a.csv"), first);
  EXPECT_EQ(first.rfind("# sdb-report v1\n", 0), 0u);
  EXPECT_NE(first.find("\nn_side,h,err_u1_h1,err_u2_h1,err_p_l2,err_c_l2,err_c_h1,order_c_h1,"
                       "wall_ms\n"),
            std::string::npos);
  EXPECT_EQ(parse_report_metadata(first), c);
  for (const auto& e : fs::directory_iterator(dir))
    EXPECT_EQ(e.path().filename().string().find(".tmp."), std::string::npos);
}

TEST(Study, SideFilesForStepsAndIndicators) {
  const auto dir = scratch_dir("side");
  RunConfig c;
  c.mesh_sizes = {3};
  c.t_final = 0.5;
  c.step_csv = (dir / "steps.csv").string();
  c.indicators = (dir / "ind.csv").string();
  run_study(c);
  std::istringstream steps(slurp(dir / "steps.csv"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(steps, line)) ++lines;
  const auto n_steps = TimeScheme::fitted(0.0, std::sqrt(2.0) / 3.0, 0.5).n_steps;
  EXPECT_EQ(lines, 1 + n_steps);
  std::istringstream ind(slurp(dir / "ind.csv"));
  lines = 0;
  while (std::getline(ind, line)) ++lines;
  EXPECT_EQ(lines, 1u + 18u);
}

TEST(Study, ParallelMeshesKeepOrder) {
  RunConfig c;
  c.mesh_sizes = {3, 4, 5};
  c.jobs = 3;
  c.timing = false;
  const auto par = run_study(c);
  c.jobs = 1;
  const auto seq = run_study(c);
  ASSERT_EQ(par.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(par.rows[i].n_side, c.mesh_sizes[i]);
    EXPECT_EQ(par.rows[i].errors.c.h1, seq.rows[i].errors.c.h1);
  }
}

TEST(Study, CompareMethodsSmoke) {
  const auto dir = scratch_dir("cmp");
  RunConfig c;
  c.mesh_sizes = {4};
  c.output = (dir / "cmp.csv").string();
  const auto r = compare_methods(c);
  ASSERT_EQ(r.galerkin.rows.size(), 1u);
  ASSERT_EQ(r.asgs.rows.size(), 1u);
  EXPECT_EQ(r.galerkin.config.method, Method::galerkin);
  const auto csv = slurp(dir / "cmp.csv");
  EXPECT_NE(csv.find("ratio_asgs_over_galerkin"), std::string::npos);
}

TEST(Study, AtomicWriteReplacesWholeFile) {
  const auto dir = scratch_dir("atomic");
  const auto p = (dir / "f.txt").string();
  write_atomic(p, "first version, longer\n");
  write_atomic(p, "second\n");
  EXPECT_EQ(slurp(p), "second\n");
  EXPECT_THROW(write_atomic((dir / "missing" / "f.txt").string(), "x"), ConfigError);
}

#ifdef SDB_CLI_PATH
TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("cli");
  const std::string cli = SDB_CLI_PATH;
  const auto run = [](const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  EXPECT_EQ(run(cli + " --mesh-sizes 3 --t-final 0.2 --out " + (dir / "ok.csv").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "ok.csv"));
  EXPECT_EQ(run(cli + " --mesh-sizes 5,3"), 2);
  EXPECT_EQ(run(cli + " --theta 0.5"), 2);
  EXPECT_EQ(run(cli + " --config /nonexistent.cfg"), 2);
  EXPECT_EQ(run(cli + " --mesh-sizes 3 --set sigma=-1"), 2);
  // c1u = c2u = 0 makes tau1 infinite and the step system unsolvable.
  EXPECT_EQ(run(cli + " --mesh-sizes 3 --set c1u=0 --set c2u=0"), 3);
}
#endif
