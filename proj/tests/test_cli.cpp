#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "confbb/cli.hpp"

namespace fs = std::filesystem;
using confbb::cli::json;

namespace {

struct RunOutput {
    int code = -1;
    std::string err;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(read_file(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

class CliTest : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / ("confbb_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path write_config(const json& cfg, const std::string& name = "config.json") const {
        const fs::path p = dir / name;
        std::ofstream(p) << cfg.dump(2);
        return p;
    }

    RunOutput run(const std::string& args, const std::string& env = "") const {
        const fs::path err = dir / "stderr.txt";
        const std::string cmd = env + (env.empty() ? "" : " ") + CONFBB_TOOL_PATH + std::string(" ") + args + " > " +
                                (dir / "stdout.txt").string() + " 2> " + err.string();
        const int status = std::system(cmd.c_str());
        RunOutput r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.err = read_file(err);
        return r;
    }

    RunOutput run_cmd(const std::string& sub, const fs::path& cfg, const fs::path& out, const std::string& extra = "",
                      const std::string& env = "") const {
        return run(sub + " --config " + cfg.string() + " --out " + out.string() + (extra.empty() ? "" : " " + extra), env);
    }
};

json small_bench(json functions) {
    return {{"function", std::move(functions)},
            {"n_train", 40},
            {"n_val", 20},
            {"n_test", 40},
            {"nominal_level", 0.9},
            {"criterion", "log_score"},
            {"seed", 3},
            {"model", "linear"},
            {"grid", {0.5, 1.0, 2.0}},
            {"B_cal", 100},
            {"B_test", 200}};
}

json small_mlp(const std::string& function) {
    json c = small_bench(function);
    c["model"] = "mlp";
    c["hidden_width"] = 8;
    c["n_train"] = 60;
    return c;
}

}  // namespace

TEST_F(CliTest, BenchWritesTableWithAverageRow) {
    const RunOutput r = run_cmd("bench", write_config(small_bench("all")), dir / "out");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = read_csv(dir / "out" / "results.csv");
    ASSERT_EQ(rows.size(), 12u);
    EXPECT_EQ(read_file(dir / "out" / "results.csv").substr(0, std::string(confbb::cli::kResultsHeader).size() + 1),
              std::string("function,dim,method,alpha_hat,coverage,log_score,runtime_s,seed\n"));
    const std::vector<std::string> dims{"8", "3", "2", "3", "5", "4", "4", "1", "2", "4"};
    double cov = 0.0;
    for (std::size_t i = 1; i <= 10; ++i) {
        ASSERT_EQ(rows[i].size(), 8u);
        EXPECT_EQ(rows[i][1], dims[i - 1]);
        EXPECT_EQ(rows[i][2], "ifbb");
        EXPECT_EQ(rows[i][7], "3");
        EXPECT_GT(std::stod(rows[i][6]), 0.0);
        cov += std::stod(rows[i][4]);
    }
    EXPECT_EQ(rows[11][0], "Average");
    EXPECT_EQ(rows[11][1], "");
    EXPECT_NEAR(std::stod(rows[11][4]), cov / 10.0, 1e-5);

    const json j = json::parse(read_file(dir / "out" / "results.json"));
    ASSERT_EQ(j.at("rows").size(), 10u);
    EXPECT_EQ(j.at("rows")[0].at("function"), "Borehole");
    EXPECT_NEAR(j.at("rows")[0].at("coverage").get<double>(), std::stod(rows[1][4]), 1e-6);
    EXPECT_EQ(std::stod(rows[1][3]), j.at("rows")[0].at("alpha_hat").get<double>());
    EXPECT_TRUE(confbb::cli::verify_manifest(dir / "out" / "manifest.json"));
}

TEST_F(CliTest, ManifestDigestDetectsEdits) {
    ASSERT_EQ(run_cmd("bench", write_config(small_bench("Forrester")), dir / "out").code, 0);
    const fs::path mp = dir / "out" / "manifest.json";
    json m = json::parse(read_file(mp));
    for (const char* key : {"config_digest", "seed", "timestamp", "tool_version", "config"}) EXPECT_TRUE(m.contains(key)) << key;
    EXPECT_EQ(m.at("tool_version"), confbb::cli::kToolVersion);
    EXPECT_EQ(m.at("config").at("B_test"), 200);
    EXPECT_EQ(m.at("config").at("noise_sd"), "auto");
    EXPECT_TRUE(confbb::cli::verify_manifest(mp));
    m["config"]["seed"] = 4;
    std::ofstream(mp) << m.dump(2);
    EXPECT_FALSE(confbb::cli::verify_manifest(mp));
}

TEST_F(CliTest, MissingKeyIsAConfigError) {
    json c = small_bench("Forrester");
    c.erase("nominal_level");
    const RunOutput r = run_cmd("bench", write_config(c), dir / "out");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("nominal_level"), std::string::npos) << r.err;
}

TEST_F(CliTest, UnknownKeyIsAConfigError) {
    json c = small_bench("Forrester");
    c["nominal"] = 0.9;
    const RunOutput r = run_cmd("calibrate", write_config(c), dir / "out");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("nominal"), std::string::npos) << r.err;
}

TEST_F(CliTest, BadValuesAndUsage) {
    json c = small_bench("Forrester");
    c["nominal_level"] = 1.5;
    EXPECT_EQ(run_cmd("bench", write_config(c), dir / "out").code, 1);
    c = small_bench("NoSuchFunction");
    const RunOutput unknown = run_cmd("bench", write_config(c), dir / "out");
    EXPECT_EQ(unknown.code, 1);
    EXPECT_NE(unknown.err.find("function"), std::string::npos);
    EXPECT_EQ(run_cmd("bench", dir / "missing.json", dir / "out").code, 1);
    std::ofstream(dir / "broken.json") << "{ not json";
    EXPECT_EQ(run_cmd("bench", dir / "broken.json", dir / "out").code, 1);
    EXPECT_EQ(run("bench --out " + (dir / "out").string()).code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_EQ(run("--version").code, 0);
}

TEST_F(CliTest, FailedRowGivesPartialFailure) {
    json c = small_bench({"Forrester", "Branin"});
    c["n_train"] = 1;  // too few points for a linear fit
    const RunOutput r = run_cmd("bench", write_config(c), dir / "out");
    EXPECT_EQ(r.code, 2);
    const auto rows = read_csv(dir / "out" / "results.csv");
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[1][4], "NA");
}

TEST_F(CliTest, SeedOverride) {
    const fs::path cfg = write_config(small_bench("Forrester"));
    ASSERT_EQ(run_cmd("bench", cfg, dir / "a", "--seed 11").code, 0);
    const auto rows = read_csv(dir / "a" / "results.csv");
    EXPECT_EQ(rows[1][7], "11");
    EXPECT_EQ(json::parse(read_file(dir / "a" / "manifest.json")).at("seed"), 11);
}

TEST_F(CliTest, CalibrateCurveMatchesExternalArgmax) {
    json c = small_bench("Branin");
    c["grid"] = "default";
    ASSERT_EQ(run_cmd("calibrate", write_config(c), dir / "out").code, 0);
    const auto rows = read_csv(dir / "out" / "calibration_curve.csv");
    ASSERT_EQ(rows.size(), 14u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"alpha", "score", "selected"}));
    std::size_t best = 1, flagged = 0, n_flagged = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (std::stod(rows[i][1]) > std::stod(rows[best][1])) best = i;
        if (rows[i][2] == "true") {
            flagged = i;
            ++n_flagged;
        } else {
            EXPECT_EQ(rows[i][2], "false");
        }
    }
    EXPECT_EQ(n_flagged, 1u);
    EXPECT_EQ(flagged, best);
    const json j = json::parse(read_file(dir / "out" / "calibration.json"));
    EXPECT_EQ(j.at("alpha_hat").get<double>(), std::stod(rows[best][0]));
    EXPECT_EQ(j.at("scores").size(), 13u);
    EXPECT_TRUE(confbb::cli::verify_manifest(dir / "out" / "manifest.json"));
}

TEST_F(CliTest, OracleCompareScalarMeanIsExact) {
    json c = small_bench("ScalarMean");
    c["draws"] = 200;
    ASSERT_EQ(run_cmd("oracle-compare", write_config(c), dir / "out").code, 0);
    const auto rows = read_csv(dir / "out" / "oracle_draws.csv");
    ASSERT_EQ(rows.size(), 201u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"draw", "alpha", "param_err", "pred_err"}));
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i][0], std::to_string(i - 1));
        EXPECT_LE(std::stod(rows[i][2]), 1e-10);
        EXPECT_LE(std::stod(rows[i][3]), 1e-10);
    }
    const json j = json::parse(read_file(dir / "out" / "oracle_summary.json"));
    EXPECT_LE(j.at("max_param_err").get<double>(), 1e-10);
}

TEST_F(CliTest, OracleCompareLinearQuadraticRatio) {
    json c = small_bench("Linear3");
    c["draws"] = 20;
    ASSERT_EQ(run_cmd("oracle-compare", write_config(c), dir / "out").code, 0);
    const json j = json::parse(read_file(dir / "out" / "oracle_summary.json"));
    EXPECT_GE(j.at("quadratic_ratio").get<double>(), 3.0);
    EXPECT_LE(j.at("quadratic_ratio").get<double>(), 5.0);
    EXPECT_GT(j.at("max_param_err").get<double>(), 0.0);
}

TEST_F(CliTest, OracleCompareMlpPredictionErrorIsSmall) {
    // the linearization error shrinks relative to the spread as n grows; the
    // Gauss-Newton default keeps a first-order error, so the exact Hessian is used
    json c = small_mlp("Forrester");
    c["n_train"] = 1500;
    c["hessian_mode"] = "exact";
    c["draws"] = 10;
    c["directions"] = 1;
    ASSERT_EQ(run_cmd("oracle-compare", write_config(c), dir / "out").code, 0);
    const json j = json::parse(read_file(dir / "out" / "oracle_summary.json"));
    EXPECT_LE(j.at("mean_pred_err").get<double>(), 0.1 * j.at("predictive_sd").get<double>());
}

TEST_F(CliTest, ConsistencyRows) {
    json c = small_mlp("Forrester");
    c["grid"] = "default";
    c["n_test"] = 1000;
    c["replications"] = 6;
    c["B_cal"] = 150;
    ASSERT_EQ(run_cmd("consistency", write_config(c), dir / "out").code, 0);
    const auto rows = read_csv(dir / "out" / "consistency.csv");
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"m", "mean_gap", "sd_gap"}));
    EXPECT_EQ(rows[1][0], "25");
    EXPECT_EQ(rows[3][0], "400");
    for (std::size_t i = 1; i < 4; ++i) EXPECT_GT(std::stod(rows[i][1]), 0.0);
    EXPECT_LT(std::stod(rows[3][1]), std::stod(rows[1][1]));
    const json j = json::parse(read_file(dir / "out" / "consistency.json"));
    EXPECT_EQ(j.at("rows").size(), 3u);
}

TEST_F(CliTest, CompareDropoutSharesTheSplit) {
    json c = small_mlp("Forrester");
    c["dropout_T"] = 200;
    ASSERT_EQ(run_cmd("compare-dropout", write_config(c), dir / "out").code, 0);
    const auto rows = read_csv(dir / "out" / "comparison.csv");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"method", "coverage", "log_score", "runtime_s", "split_hash"}));
    EXPECT_EQ(rows[1][0], "ifbb");
    EXPECT_EQ(rows[2][0], "mc_dropout");
    EXPECT_EQ(rows[1][4], rows[2][4]);
    EXPECT_EQ(rows[1][4].size(), 16u);
    EXPECT_GT(std::stod(rows[1][3]), 0.0);
    EXPECT_GT(std::stod(rows[2][3]), 0.0);
    c["model"] = "linear";
    EXPECT_EQ(run_cmd("compare-dropout", write_config(c, "linear.json"), dir / "lin").code, 1);
}

TEST_F(CliTest, ReproducibleAcrossRunsAndThreadCounts) {
    json c = small_mlp("Forrester");
    c["function"] = {"Forrester", "CurrinExp"};
    c["record_runtime"] = false;
    const fs::path cfg = write_config(c);
    ASSERT_EQ(run_cmd("bench", cfg, dir / "a", "--threads 1").code, 0);
    ASSERT_EQ(run_cmd("bench", cfg, dir / "b", "--threads 4").code, 0);
    ASSERT_EQ(run_cmd("bench", cfg, dir / "c", "", "CONFBB_THREADS=3").code, 0);
    const std::string a = read_file(dir / "a" / "results.csv");
    EXPECT_EQ(a, read_file(dir / "b" / "results.csv"));
    EXPECT_EQ(a, read_file(dir / "c" / "results.csv"));
    EXPECT_EQ(read_file(dir / "a" / "results.json"), read_file(dir / "b" / "results.json"));
    EXPECT_EQ(json::parse(read_file(dir / "a" / "manifest.json")).at("config_digest"),
              json::parse(read_file(dir / "b" / "manifest.json")).at("config_digest"));
}
