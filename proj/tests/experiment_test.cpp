#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pinnverse/experiment.hpp"

using namespace pinnverse;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text, const std::vector<std::string>& overrides = {}) {
  std::istringstream is(text);
  return parse_config(is, overrides);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pinnverse_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(is, l);) lines.push_back(l);
  return lines;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

// Results CSV with the runtime column blanked.
std::vector<std::string> without_runtime(const fs::path& csv) {
  auto lines = read_lines(csv);
  for (auto& l : lines) {
    auto f = split(l);
    f[8].clear();
    std::string joined;
    for (const auto& x : f) joined += x + ',';
    l = joined;
  }
  return lines;
}

const char* kSmoke = R"(
# comment
[experiment]
benchmark = reaction
methods = nelder-mead
zeta = 0
xi = 0
)";

}  // namespace

TEST(Config, ParsesGridAndDefaults) {
  const auto c = parse(R"(
[experiment]
benchmark = fhn
methods = pinnverse, pinn
zeta = 0, 0.1
xi = 0.25
replicates = 2
epochs = 100
highlight = 0.1, 0.25
[collocation]
interior = 512
[optimizer]
penalty_c = 2
)");
  EXPECT_EQ(c.benchmark, "fhn");
  EXPECT_EQ(c.methods, (std::vector<std::string>{"pinnverse", "pinn"}));
  EXPECT_EQ(c.zeta, (std::vector<double>{0.0, 0.1}));
  EXPECT_EQ(c.xi, (std::vector<double>{0.25}));
  EXPECT_EQ(c.epochs, 100u);
  ASSERT_TRUE(c.counts);
  EXPECT_EQ(c.counts->interior, 512u);
  EXPECT_EQ(c.counts->initial, 1u);  // benchmark default kept
  EXPECT_EQ(c.train.penalty_c, 2.0);
  EXPECT_EQ(grid_cells(c).size(), 4u);
}

TEST(Config, DefaultGrid) {
  const auto c = parse("[experiment]\nbenchmark = reaction\n");
  EXPECT_EQ(c.zeta, (std::vector<double>{0.0, 0.05, 0.15, 0.25, 0.30}));
  EXPECT_EQ(c.xi, (std::vector<double>{0.25, 0.75, 1.50, 5.00}));
  EXPECT_EQ(c.methods.size(), 3u);
}

TEST(Config, OverridesApplyAfterFile) {
  const auto c = parse(kSmoke, {"experiment.zeta=0.2", "solver.rtol=1e-9"});
  EXPECT_EQ(c.zeta, (std::vector<double>{0.2}));
  EXPECT_EQ(c.solve.rtol, 1e-9);
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse(kSmoke, {"experiment.methods="}), ConfigError);
  EXPECT_THROW(parse(kSmoke, {"experiment.methods=pinnverse,bfgs"}), ConfigError);
  EXPECT_THROW(parse(kSmoke, {"experiment.zeta=0.31"}), ConfigError);
  EXPECT_THROW(parse(kSmoke, {"experiment.xi=5.5"}), ConfigError);
  EXPECT_THROW(parse(kSmoke, {"experiment.highlight=0.1,0"}), ConfigError);
  EXPECT_THROW(parse(kSmoke, {"experiment.colour=red"}), ConfigError);
  EXPECT_THROW(parse(kSmoke, {"network.fourier_frequencies=4"}), ConfigError);
  EXPECT_THROW(parse(kSmoke, {"optimizer.beta1=1.5"}), ConfigError);
  EXPECT_THROW(parse(kSmoke, {"nonsense"}), ConfigError);
  EXPECT_THROW(parse("[experiment]\nmethods = pinn\n"), ConfigError);
  EXPECT_THROW(parse("[experiment]\nbenchmark = heat\n"), ConfigError);
  EXPECT_THROW(parse("[experiment]\nbenchmark = burgers\n[collocation]\nboundary = 3\n"), ConfigError);
  EXPECT_THROW(parse("[experiment]\nbenchmark = reaction\nepochs = 1.5\n"), ConfigError);
  EXPECT_THROW(parse("[experiment\nbenchmark = reaction\n"), ConfigError);
}

TEST(Seeds, SharedWithinCellDistinctAcross) {
  const auto a = cell_seed("reaction", 0.05, 0.25, 0);
  EXPECT_EQ(a, cell_seed("reaction", 0.05, 0.25, 0));
  EXPECT_NE(a, cell_seed("reaction", 0.05, 0.25, 1));
  EXPECT_NE(a, cell_seed("reaction", 0.05, 0.75, 0));
  EXPECT_NE(a, cell_seed("fhn", 0.05, 0.25, 0));
  EXPECT_NE(a, cell_init_seed("reaction", 0.05, 0.25, 0));
}

TEST(Run, DegenerateNelderMeadStartRecoversTruth) {
  auto c = parse(kSmoke);
  c.output = scratch_dir("smoke");
  const auto summary = run_experiment(c);
  EXPECT_EQ(summary.rows, 1u);
  const auto lines = read_lines(c.output / "results.csv");
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], results_header());
  const auto f = split(lines[1]);
  EXPECT_EQ(f[0], "nelder-mead");
  EXPECT_LT(std::stod(f[4]), 1e-3);
  EXPECT_EQ(f[9], "ok");
  EXPECT_TRUE(fs::exists(c.output / "runs" / "nelder-mead_z0_x0_r0.json"));
  fs::remove_all(c.output);
}

TEST(Run, RerunIsIdenticalExceptRuntime) {
  auto c = parse(R"(
[experiment]
benchmark = reaction
methods = pinnverse, pinn, nelder-mead
zeta = 0, 0.1
xi = 0.75
epochs = 60
[collocation]
interior = 64
)");
  c.output = scratch_dir("rerun_a");
  run_experiment(c, 2);
  const auto a = without_runtime(c.output / "results.csv");
  fs::remove_all(c.output);
  c.output = scratch_dir("rerun_b");
  run_experiment(c, 1);
  const auto b = without_runtime(c.output / "results.csv");
  fs::remove_all(c.output);
  ASSERT_EQ(a.size(), 7u);
  EXPECT_EQ(a, b);
  // Grid order: both cells, methods in configured order.
  EXPECT_EQ(split(a[1])[0], "pinnverse");
  EXPECT_EQ(split(a[3])[0], "nelder-mead");
  EXPECT_EQ(split(a[4])[1], "0.10000000000000001");
  EXPECT_EQ(split(a[1])[3], split(a[3])[3]);  // one dataset seed per cell
}

TEST(Run, HighlightExports) {
  auto c = parse(kSmoke, {"experiment.methods=nelder-mead,pinnverse", "experiment.epochs=20", "collocation.interior=32",
                          "experiment.highlight=0,0", "experiment.probe_points=101"});
  c.output = scratch_dir("highlight");
  run_experiment(c);
  const fs::path h = c.output / "highlight";
  for (const char* f : {"data.csv", "reference.csv", "nelder-mead_estimated.csv", "nelder-mead_history.csv",
                        "pinnverse_losses.csv", "pinnverse_nn.csv", "pinnverse_estimated.csv"})
    EXPECT_TRUE(fs::exists(h / f)) << f;
  const auto ref = read_lines(h / "reference.csv");
  const auto nn = read_lines(h / "pinnverse_nn.csv");
  const auto est = read_lines(h / "nelder-mead_estimated.csv");
  EXPECT_EQ(ref[0], "x,t,component,value");
  EXPECT_EQ(ref.size(), 1u + 101u * 4u);
  EXPECT_EQ(nn.size(), ref.size());
  ASSERT_EQ(est.size(), ref.size());
  // The reference is the plain forward solve.
  const auto problem = make_problem("reaction");
  const auto probe = probe_points(*problem, 101);
  const Eigen::MatrixXd direct = solve_on_points(*problem, problem->spec().eta_true, probe);
  for (std::size_t r = 1; r < ref.size(); ++r) {
    const auto fr = split(ref[r]), fe = split(est[r]);
    const std::size_t i = (r - 1) / 4;
    const int comp = std::stoi(fr[2]);
    EXPECT_EQ(std::stod(fr[3]), direct(comp, static_cast<Eigen::Index>(i)));
    EXPECT_NEAR(std::stod(fe[3]), std::stod(fr[3]), 1e-8);
  }
  EXPECT_EQ(read_lines(h / "pinnverse_losses.csv").size(), 21u);
  fs::remove_all(c.output);
}

#ifdef PINNVERSE_CLI
TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir("cli");
  fs::create_directories(dir);
  const fs::path cfg = dir / "smoke.ini";
  std::ofstream(cfg) << kSmoke << "output = " << (dir / "out").string() << "\n";
  const std::string cli = PINNVERSE_CLI;
  const auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status(cli + " validate --config " + cfg.string()), 0);
  EXPECT_EQ(status(cli + " run --config " + cfg.string() + " --override experiment.methods="), 2);
  EXPECT_EQ(status(cli + " run --config " + cfg.string() + " --override experiment.zeta=0.9"), 2);
  EXPECT_EQ(status(cli + " oracle heat --eta 1 --out " + (dir / "o.csv").string()), 2);
  EXPECT_EQ(status(cli + " oracle reaction --eta 1.5,0.5,1,0.1 --out /nonexistent/dir/o.csv"), 3);
  EXPECT_EQ(status(cli + " run --config " + cfg.string()), 0);
  EXPECT_EQ(read_lines(dir / "out" / "results.csv").size(), 2u);
  fs::remove_all(dir);
}
#endif
