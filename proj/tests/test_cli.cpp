#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

using namespace countsel;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "countsel");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("countsel_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }
    fs::path dir_;
};

}  // namespace

TEST(ReadCounts, HeaderAndTrailingBlank) {
    std::istringstream in("y\n1\n0\n12\n\n");
    EXPECT_EQ(io::read_counts(in), (CountSeries{1, 0, 12}));
}

TEST(ReadCounts, ErrorsNameTheLine) {
    auto line_of = [](const std::string& text) -> std::size_t {
        std::istringstream in(text);
        try {
            io::read_counts(in);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    EXPECT_EQ(line_of("y\n1\n-1\n"), 3u);
    EXPECT_EQ(line_of("1\n2.5\n"), 2u);
    EXPECT_EQ(line_of("1\n\n2\n"), 2u);
    EXPECT_EQ(line_of("1\nabc\n"), 2u);
    EXPECT_NE(line_of(""), 0u);
}

TEST_F(CliTest, SimulateWritesRowsDeterministically) {
    const std::vector<std::string> args{"simulate", "--family", "poisson", "--ingarch", "2,0", "--theta",
                                        "0.5,0.3,0.25", "--n", "2000", "--seed", "7", "-o"};
    auto a = args, b = args;
    a.push_back(path("a.csv"));
    b.push_back(path("b.csv"));
    const auto ra = run_cli(a);
    ASSERT_EQ(ra.code, 0) << ra.err;
    EXPECT_EQ(run_cli(b).code, 0);
    const auto text = slurp(path("a.csv"));
    EXPECT_EQ(text, slurp(path("b.csv")));
    std::istringstream in(text);
    EXPECT_EQ(io::read_counts(in).size(), 2000u);
    EXPECT_NE(ra.out.find("mean="), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
    EXPECT_EQ(run_cli({"simulate", "--ingarch", "0,0", "--theta", "1", "--n", "0"}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--ingarch", "1,0", "--theta", "1", "--n", "5"}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--family", "gamma", "--theta", "1", "--n", "5"}).code, 2);
    EXPECT_EQ(run_cli({"fit", "-i", path("missing.csv")}).code, 2);
    EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
    EXPECT_EQ(run_cli({}).code, 2);
}

TEST_F(CliTest, ModelErrorsExitOne) {
    EXPECT_EQ(run_cli({"simulate", "--ingarch", "1,0", "--theta", "0.5,1.2", "--n", "5"}).code, 1);
    write("neg.csv", "y\n1\n-1\n");
    const auto r = run_cli({"fit", "-i", path("neg.csv"), "--ingarch", "0,0"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
}

TEST_F(CliTest, FitInterceptOnlyEqualsMean) {
    write("y.csv", "y\n1\n2\n0\n3\n1\n");
    const auto r = run_cli({"fit", "-i", path("y.csv"), "--ingarch", "0,0", "-o", path("f.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = io::Json::parse(slurp(path("f.json")));
    EXPECT_NEAR(j["theta"][0].get<double>(), 1.4, 1e-6);
    EXPECT_NE(r.out.find("E(Y_t|F_{t-1}) = 1.400"), std::string::npos) << r.out;
}

TEST_F(CliTest, SimulateOutputRoundTripsIntoSelect) {
    ASSERT_EQ(run_cli({"simulate", "--family", "bernoulli", "--ingarch", "1,0", "--theta", "0.12,0.748", "--n", "312",
                       "--seed", "3", "-o", path("b.csv")})
                  .code,
              0);
    const auto r = run_cli({"select", "-i", path("b.csv"), "--family", "bernoulli", "--pmax", "2", "--qmax", "1",
                            "--penalty", "logn", "--penalty", "pow:1/3"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = io::Json::parse(r.out);
    ASSERT_EQ(j["selections"].size(), 2u);
    const auto& t0 = j["selections"][0]["table"];
    const auto& t1 = j["selections"][1]["table"];
    for (std::size_t i = 0; i < t0.size(); ++i) EXPECT_EQ(t0[i]["loglik"], t1[i]["loglik"]);
}

TEST_F(CliTest, InterceptOnlyCollectionChosenTrivially) {
    write("y.csv", "3\n1\n4\n1\n5\n");
    const auto r = run_cli({"select", "-i", path("y.csv"), "--pmax", "0", "--qmax", "0", "--format", "table"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("INGARCH(0,0)"), std::string::npos);
}

TEST_F(CliTest, McSmallRunAndDeterminism) {
    const std::vector<std::string> args{"mc", "--preset", "model-a", "--replications", "1", "--sizes", "500",
                                        "--pmax", "1", "--qmax", "1", "--format", "json"};
    const auto a = run_cli(args);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, run_cli(args).out);
    const auto j = io::Json::parse(a.out);
    for (const auto& c : j["cells"]) {
        double s = 0.0;
        for (const auto& f : c["frequencies"]) s += f.get<double>();
        EXPECT_EQ(s, 1.0);
    }
}

TEST_F(CliTest, McConfigErrorsNameTheField) {
    write("bad.cfg", "preset = model-a\nreplicatoins = 3\n");
    auto r = run_cli({"mc", "--config", path("bad.cfg")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("replicatoins"), std::string::npos) << r.err;
    write("bad2.cfg", "preset = model-a\nsizes = 500,x\n");
    r = run_cli({"mc", "--config", path("bad2.cfg")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("sizes"), std::string::npos) << r.err;
    write("bad3.cfg", "preset = model-q\n");
    r = run_cli({"mc", "--config", path("bad3.cfg")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("preset"), std::string::npos) << r.err;
}

TEST_F(CliTest, McConfigFileRuns) {
    write("ok.cfg", "# tiny\npreset = knots-r8\nreplications = 1\nsizes = 400\nkmax = 1\nknot_candidates = 2\n");
    const auto r = run_cli({"mc", "--config", path("ok.cfg")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("K_hat=K*"), std::string::npos);
}
