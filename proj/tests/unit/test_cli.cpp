#include <glab/cli.hpp>

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using glab::cli::parse_config;
using nlohmann::json;

namespace {

struct ToolRun {
    int code = -1;
    std::string err;
};

fs::path scratch()
{
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("glab_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

ToolRun tool(const std::string& args, const std::string& env = "")
{
    const fs::path err = scratch() / "stderr.txt";
    const std::string cmd = env + " " + std::string(GLAB_TOOL_PATH) + " " + args + " >" +
                            (scratch() / "stdout.txt").string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    ToolRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(err);
    std::stringstream ss;
    ss << in.rdbuf();
    r.err = ss.str();
    return r;
}

std::vector<std::string> lines(const fs::path& p)
{
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::string write_config(const std::string& name, const json& j)
{
    const fs::path p = scratch() / name;
    std::ofstream(p) << j.dump(2);
    return p.string();
}

std::vector<std::string> data_rows(const std::vector<std::string>& ls)
{
    std::vector<std::string> out;
    for (const auto& l : ls)
        if (!l.empty() && l[0] != '#') out.push_back(l);
    return out;
}

} // namespace

TEST(Config, RejectsUnknownKeysWithPath)
{
    try {
        parse_config(json::parse(R"({"kernels": {"a0": {"gamma": 0, "shape": 1}}})"));
        FAIL() << "expected InputError";
    } catch (const glab::InputError& e) {
        EXPECT_NE(std::string(e.what()).find("kernels.a0.shape"), std::string::npos);
    }
    EXPECT_THROW(parse_config(json::parse(R"({"density": {"correlation": 0.3}})")), glab::InputError);
    EXPECT_THROW(parse_config(json::parse(R"({"solver": {"n": -5}})")), glab::InputError);
    EXPECT_THROW(parse_config(json::parse(R"({"solver": {"whiten_entropy": 1}})")), glab::InputError);
    EXPECT_FALSE(parse_config(json::parse(R"({"solver": {"whiten_entropy": false}})")).solver.whiten_entropy);
    const auto c = parse_config(json::parse(R"({"density": {"kind": "maxwellian"}, "seed": 4})"));
    EXPECT_EQ(c.density.kind, "maxwellian");
    EXPECT_EQ(c.seed, 4u);
    // round trip through the resolved form
    const auto back = parse_config(glab::cli::to_json(c));
    EXPECT_EQ(glab::cli::to_json(back), glab::cli::to_json(c));
}

TEST(Tool, CheckPairsCoshPasses)
{
    const fs::path js = scratch() / "pairs.json";
    const ToolRun r = tool("check-pairs --pair cosh --json-out " + js.string());
    EXPECT_EQ(r.code, 0) << r.err;
    std::ifstream in(js);
    const json rep = json::parse(in);
    ASSERT_TRUE(rep.is_array() || rep.is_object());
    EXPECT_NE(rep.dump().find("compatibility"), std::string::npos);
}

TEST(Tool, ValidationErrorsExitOne)
{
    const std::string missing = write_config("missing.json", {{"kernels", {{"a0", {{"form", "power_law"}}}}}});
    ToolRun r = tool("--config " + missing + " functionals");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("kernels.a0.gamma"), std::string::npos) << r.err;
    const std::string unknown = write_config("unknown.json", {{"sampler", {{"sample", 10}}}});
    r = tool("--config " + unknown + " functionals");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("sampler.sample"), std::string::npos) << r.err;
    EXPECT_EQ(tool("functionals --eps-list 0.1,abc").code, 1);
    EXPECT_EQ(tool("grazing-sweep --eps-list 0.1,0.2 --samples 100").code, 1);
    EXPECT_EQ(tool("no-such-command").code, 1);
    EXPECT_EQ(tool("check-pairs", "GRAZING_LAB_SEED=x").code, 1);
}

TEST(Tool, FunctionalsReproducibleAndSeeded)
{
    const std::string cfg = write_config(
        "fn.json", {{"density", {{"kind", "anisotropic"}}},
                    {"kernels", {{"a0", {{"gamma", 0.0}}}, {"beta", {{"nu", 0.5}}}, {"kappa", {{"form", "constant"}}}}},
                    {"pair", "cosh"},
                    {"sampler", {{"samples", 2000}}},
                    {"functionals", {{"eps_list", {0.5, 0.2}}}},
                    {"seed", 5}});
    const fs::path a = scratch() / "fn.csv";
    ASSERT_EQ(tool("--config " + cfg + " functionals --out " + a.string()).code, 0);
    const auto la = lines(a);
    ASSERT_EQ(tool("--config " + cfg + " functionals --out " + a.string()).code, 0);
    const auto lb = lines(a);
    ASSERT_EQ(tool("--config " + cfg + " functionals --out " + a.string(), "GRAZING_LAB_SEED=6").code, 0);
    const auto lc = lines(a);
    ASSERT_EQ(la.size(), lb.size());
    for (std::size_t i = 0; i < la.size(); ++i) {
        if (la[i].rfind("# generated", 0) != 0) {
            EXPECT_EQ(la[i], lb[i]);
        }
    }
    EXPECT_NE(data_rows(la), data_rows(lc));
    bool seed_line = false;
    for (const auto& l : lc) seed_line = seed_line || l == "# seed 6";
    EXPECT_TRUE(seed_line);
    // header names columns, value columns pair with _stderr
    const auto rows = data_rows(la);
    ASSERT_FALSE(rows.empty());
    EXPECT_NE(rows[0].find("value"), std::string::npos);
    EXPECT_NE(rows[0].find("value_stderr"), std::string::npos);
    // --seed beats the environment
    ASSERT_EQ(tool("--config " + cfg + " --seed 5 functionals --out " + a.string(), "GRAZING_LAB_SEED=6").code, 0);
    EXPECT_EQ(data_rows(lines(a)), data_rows(la));
}

TEST(Tool, GrazingSweepWritesRowsAndPlot)
{
    const fs::path out = scratch() / "sweep.csv";
    const ToolRun r = tool("grazing-sweep --pair cosh --gamma 0 --eps-list 0.4,0.2,0.1,0.05 --samples 2000 --out " +
                       out.string());
    EXPECT_TRUE(r.code == 0 || r.code == 2) << r.err;
    EXPECT_EQ(data_rows(lines(out)).size(), 5u); // header + 4
    EXPECT_TRUE(fs::exists(out.string() + ".svg"));
}

TEST(Tool, SimulateWritesTraceAndSnapshot)
{
    const fs::path tr = scratch() / "trace.csv", sn = scratch() / "snap.csv";
    const ToolRun r = tool("simulate --n 200 --dt 0.01 --horizon 0.05 --eps 0.5 --kappa exp_bracket:1 --trace-every 1 "
                       "--trace-out " + tr.string() + " --snapshot-out " + sn.string());
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(data_rows(lines(tr)).size(), 1u + 6u);
    const auto snap = data_rows(lines(sn));
    ASSERT_EQ(snap.size(), 201u);
    EXPECT_EQ(std::count(snap[1].begin(), snap[1].end(), ','), 3);
}

TEST(Tool, CheckGeometryPasses)
{
    const ToolRun r = tool("check-geometry --frames 5000");
    EXPECT_EQ(r.code, 0) << r.err;
}
