#include "anisoflow/cli.hpp"
#include "anisoflow/config.hpp"
#include "anisoflow/field_io.hpp"
#include "anisoflow/initializers.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace anisoflow;
namespace fs = std::filesystem;

namespace {

const char* kBase = R"(seed = 3

[grid]
dim = 1
nodes = 17
lengths = 1

[time]
T = 1
N = 10

[anisotropy]
kind = isotropic

[potential]
kind = double_well

[initial]
kind = constant
value = 1
)";

class CliTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("anisoflow_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write_config(const std::string& text, const std::string& name = "run.ini")
    {
        const fs::path p = dir_ / name;
        std::ofstream(p) << text;
        return p;
    }

    int run(const std::string& command, const fs::path& config, const fs::path& out,
            std::vector<std::string> overrides = {})
    {
        cli::Request r{command, config, std::move(overrides), out, std::nullopt};
        log_.str("");
        err_.str("");
        return cli::run(r, log_, err_);
    }

    static std::string slurp(const fs::path& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path dir_;
    std::ostringstream log_, err_;
};

std::vector<std::string> column(const std::string& csv, std::size_t index)
{
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> out;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string cell;
        for (std::size_t k = 0; k <= index; ++k) std::getline(row, cell, ',');
        out.push_back(cell);
    }
    return out;
}

}  // namespace

TEST(Config, DefaultsAndOverrides)
{
    const RunConfig c = parse_config(kBase, {"time.N=20", "potential.kind=moreau_yosida", "potential.penalty=50"});
    EXPECT_EQ(c.steps, 20);
    EXPECT_EQ(c.seed, 3u);
    EXPECT_EQ(c.pot_kind, Potential::Kind::MoreauYosida);
    EXPECT_DOUBLE_EQ(c.make_potential().penalty(), 50.0);
    EXPECT_EQ(c.make_grid().node_count(), 17);
    EXPECT_DOUBLE_EQ(c.make_partition().tau(1), 0.05);
}

TEST(Config, HashTracksEffectiveSettings)
{
    const RunConfig a = parse_config(kBase);
    const RunConfig b = parse_config(kBase, {"time.N=10"});
    const RunConfig c = parse_config(kBase, {"time.N=11"});
    EXPECT_EQ(a.hash, b.hash);
    EXPECT_NE(a.hash, c.hash);
    EXPECT_EQ(a.hash, fnv1a(a.canonical_text));
    EXPECT_EQ(a.hash, parse_config(kBase, {"output.dir=/elsewhere"}).hash);
}

TEST(Config, RejectsUnknownAndMalformedKeys)
{
    try {
        (void)parse_config(std::string(kBase) + "bogus = 1\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "initial.bogus");
    }
    EXPECT_THROW(parse_config(kBase, {"time.N=abc"}), ConfigError);
    EXPECT_THROW(parse_config(kBase, {"grid.nodes=1"}), ConfigError);
    EXPECT_THROW(parse_config(kBase, {"nonsense"}), ConfigError);
    EXPECT_THROW(parse_config(kBase, {"anisotropy.kind=matrix_family"}), ConfigError);
}

TEST(Config, UniquenessRuleIsEnforced)
{
    try {
        (void)parse_config(kBase, {"time.T=3", "time.N=2"});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "time.N");
        EXPECT_NE(std::string(e.what()).find("uniqueness step-size rule"), std::string::npos);
    }
    EXPECT_NO_THROW(parse_config(kBase, {"time.T=3", "time.N=2", "solver.enforce_uniqueness=false"}));
    EXPECT_NO_THROW(parse_config(kBase, {"time.T=3", "time.N=2", "potential.kind=zero"}));
}

TEST(Config, MatrixFamilySyntax)
{
    const RunConfig c = parse_config(kBase, {"grid.dim=2", "grid.nodes=5,5", "grid.lengths=1,1",
                                             "anisotropy.kind=matrix_family",
                                             "anisotropy.matrices=1,0,0,0.04 | 0.04,0,0,1", "anisotropy.delta=1e-4"});
    const Anisotropy a = c.make_anisotropy();
    ASSERT_EQ(a.matrices().size(), 2u);
    EXPECT_DOUBLE_EQ(a.matrices()[0](1, 1), 0.04);
    EXPECT_DOUBLE_EQ(a.delta(), 1e-4);
}

TEST(Initializers, ConstantRandomAndTanh)
{
    const Grid g = build_grid(2, {5, 4}, {1.0, 1.0});
    EXPECT_EQ(constant_field(g, 1.0), Field(Field::Ones(20)));
    const Field r = random_uniform_field(g, -1, 1, 9);
    EXPECT_GE(r.minCoeff(), -1.0);
    EXPECT_LT(r.maxCoeff(), 1.0);
    EXPECT_EQ(r, random_uniform_field(g, -1, 1, 9));
    EXPECT_NE(r, random_uniform_field(g, -1, 1, 10));
    SpaceVector c(2);
    c << 0.5, 0.5;
    const Field t = tanh_circle_field(g, c, 0.3, 0.05);
    EXPECT_LE(t.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_THROW(tanh_circle_field(g, c, 0.0, 0.05), std::invalid_argument);
}

TEST_F(CliTest, SimulateStationaryRun)
{
    const fs::path out = dir_ / "out";
    ASSERT_EQ(run("simulate", write_config(kBase), out), cli::kExitOk) << err_.str();
    const auto energies = column(slurp(out / "diagnostics.csv"), 5);
    ASSERT_EQ(energies.size(), 11u);
    for (const auto& e : energies) EXPECT_EQ(e, energies.front());
    EXPECT_TRUE(fs::exists(out / "states" / "y_0000.field"));
    EXPECT_TRUE(fs::exists(out / "states" / "y_0010.field"));
    const std::string manifest = slurp(out / "manifest.txt");
    for (const char* key : {"command=simulate", "config_hash=", "seed=3", "C_psi=1\n", "C_A_hat=1\n",
                            "C_bar_A_hat=1\n", "tau_max=0.1", "tau_lt_inv_C_psi=true",
                            "tau_le_lipschitz_bound=true", "tau_le_energy_bound=true"})
        EXPECT_NE(manifest.find(key), std::string::npos) << key;
}

TEST_F(CliTest, UniquenessViolationIsConfigError)
{
    EXPECT_EQ(run("simulate", write_config(kBase), dir_ / "out", {"time.T=3", "time.N=2"}), cli::kExitConfigError);
    EXPECT_NE(err_.str().find("uniqueness step-size rule"), std::string::npos);
}

TEST_F(CliTest, UnknownKeyIsConfigError)
{
    EXPECT_EQ(run("simulate", write_config(std::string(kBase) + "[extra]\nfoo = 1\n"), dir_ / "out"),
              cli::kExitConfigError);
    EXPECT_NE(err_.str().find("extra.foo"), std::string::npos);
    EXPECT_EQ(run("simulate", dir_ / "missing.ini", dir_ / "out"), cli::kExitConfigError);
    EXPECT_EQ(run("frobnicate", write_config(kBase), dir_ / "out"), cli::kExitConfigError);
}

TEST_F(CliTest, LipschitzWarning)
{
    ASSERT_EQ(run("simulate", write_config(kBase), dir_ / "out", {"time.N=2"}), cli::kExitOk);
    EXPECT_NE(err_.str().find("Lipschitz"), std::string::npos);
}

TEST_F(CliTest, VerifyEnergyPasses)
{
    const fs::path out = dir_ / "out";
    ASSERT_EQ(run("verify-energy", write_config(kBase), out,
                  {"initial.kind=random_uniform", "anisotropy.kind=matrix_family", "anisotropy.matrices=1 | 0.3",
                   "anisotropy.delta=1e-2"}),
              cli::kExitOk)
        << err_.str();
    const std::string s = slurp(out / "summary.txt");
    EXPECT_EQ(s.substr(s.size() - 5), "PASS\n");
}

TEST_F(CliTest, OutputsAreDeterministic)
{
    const fs::path cfg = write_config(kBase);
    const std::vector<std::string> ov = {"initial.kind=random_uniform", "control.kind=constant", "control.value=0.3"};
    ASSERT_EQ(run("simulate", cfg, dir_ / "a", ov), cli::kExitOk);
    ASSERT_EQ(run("simulate", cfg, dir_ / "b", ov), cli::kExitOk);
    for (const char* f : {"diagnostics.csv", "manifest.txt", "states/y_0000.field", "states/y_0010.field"})
        EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
    cli::Request r{"simulate", cfg, ov, dir_ / "c", 99};
    ASSERT_EQ(cli::run(r, log_, err_), cli::kExitOk);
    EXPECT_NE(slurp(dir_ / "a" / "states/y_0000.field"), slurp(dir_ / "c" / "states/y_0000.field"));
    EXPECT_NE(slurp(dir_ / "c" / "manifest.txt").find("seed=99"), std::string::npos);
}

TEST_F(CliTest, OptimizeAndReplayControls)
{
    const fs::path cfg = write_config(std::string(kBase) +
                                      "\n[problem]\nlambda = 0.01\nreference_steps = 20\n"
                                      "\n[optimize]\nmethod = lbfgs\nmax_iters = 300\n");
    const fs::path out = dir_ / "opt";
    ASSERT_EQ(run("optimize", cfg, out, {"initial.kind=tanh_circle", "initial.center=0.5", "initial.width=0.1"}),
              cli::kExitOk)
        << err_.str() << log_.str();
    EXPECT_TRUE(fs::exists(out / "history.csv"));
    EXPECT_TRUE(fs::exists(out / "controls" / "u_0001.field"));
    EXPECT_TRUE(fs::exists(out / "controls" / "u_0010.field"));
    // Replaying the optimal controls reproduces the optimized final state.
    const fs::path replay = dir_ / "replay";
    ASSERT_EQ(run("simulate", cfg, replay,
                  {"initial.kind=tanh_circle", "initial.center=0.5", "initial.width=0.1", "control.kind=files",
                   "control.dir=" + (out / "controls").string()}),
              cli::kExitOk)
        << err_.str();
    EXPECT_EQ(slurp(out / "states" / "y_0010.field"), slurp(replay / "states" / "y_0010.field"));
}

TEST_F(CliTest, StudyCommandsWriteReports)
{
    const fs::path cfg = write_config(std::string(kBase) + "\n[study]\nlevels = 3\nbase_N = 4\npairs = 2\n");
    for (const char* cmd : {"study-tau", "study-bounds", "study-lipschitz"}) {
        const fs::path out = dir_ / cmd;
        const int code = run(cmd, cfg, out, {"initial.kind=tanh_circle", "initial.center=0.5", "initial.radius=0.25",
                                             "initial.width=0.1", "grid.lengths=1"});
        EXPECT_TRUE(code == cli::kExitOk || code == cli::kExitFailure) << cmd << ": " << err_.str();
        EXPECT_TRUE(fs::exists(out / "study.csv")) << cmd;
        const std::string s = slurp(out / "summary.txt");
        EXPECT_TRUE(s.ends_with("PASS\n") || s.ends_with("FAIL\n")) << cmd;
        EXPECT_EQ(code == cli::kExitOk, s.ends_with("PASS\n")) << cmd;
    }
}
