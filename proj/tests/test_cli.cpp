#include "doctest.h"
#include "support.hpp"

#include "blr/cli.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;

namespace {

const std::string kData = BLR_DATA_DIR;

fs::path scratch(const std::string &name) {
    const auto dir = fs::temp_directory_path() / ("blr_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir.parent_path());
    return dir;
}

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "blr");
    std::vector<const char *> argv;
    for (const auto &a : args) {
        argv.push_back(a.c_str());
    }
    return blr::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::vector<std::string> data_args() {
    return {"--patients", kData + "/patients.csv", "--falls", kData + "/falls.csv", "--schema", kData + "/schema.json"};
}

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string> &tail) {
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool same_tree(const fs::path &a, const fs::path &b) {
    std::vector<std::string> names;
    for (const auto &e : fs::directory_iterator(a)) {
        names.push_back(e.path().filename().string());
    }
    std::size_t count_b = 0;
    for ([[maybe_unused]] const auto &e : fs::directory_iterator(b)) {
        ++count_b;
    }
    if (names.size() != count_b) {
        return false;
    }
    for (const auto &n : names) {
        if (slurp(a / n) != slurp(b / n)) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("fit writes a summary and a manifest") {
    const auto out = scratch("fit");
    CHECK(run(with({"fit", "--stage", "1", "--model", "tinetti_gait", "--out", out.string()}, data_args())) == 0);
    CHECK(fs::exists(out / "fit.json"));
    CHECK(fs::exists(out / "summary.txt"));
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["command"] == "fit");
    CHECK(manifest["version"] == blr::kVersion);
    CHECK_FALSE(manifest["config"].contains("threads"));
    const auto fit = nlohmann::json::parse(slurp(out / "fit.json"));
    CHECK(fit["converged"] == true);
    CHECK(slurp(out / "summary.txt").find("tinetti_gait") != std::string::npos);
}

TEST_CASE("an existing output directory needs --force") {
    const auto out = scratch("force");
    const auto args = with({"summarize", "--out", out.string()}, data_args());
    CHECK(run(args) == 0);
    CHECK(run(args) == 2);
    CHECK(run(with(args, {"--force"})) == 0);
    const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(summary["n_patients"] == 99);
    CHECK(summary["n_falls"] == 335);
}

TEST_CASE("exit codes") {
    const auto out = scratch("codes");
    CHECK(run({"--version"}) == 0);
    CHECK(run({}) == 2);
    CHECK(run({"fit", "--stage", "3"}) == 2);
    CHECK(run({"fit", "--patients", "/nonexistent.csv", "--falls", "/nonexistent.csv", "--schema",
               "/nonexistent.json", "--out", (out / "a").string()}) == 2);
    CHECK(run(with({"fit", "--model", "no_such_variable", "--out", (out / "b").string()}, data_args())) == 2);
    CHECK(run(with({"cv", "--model", "age", "--out", (out / "c").string()}, data_args())) == 2); // no seed
    // a tolerance nobody can meet fails verification
    CHECK(run(with({"verify", "--stage", "1", "--model", "age", "--tolerance", "1e-9", "--quad-points", "41",
                    "--out", (out / "d").string()},
                   data_args())) == 1);
    // too few importance samples is a numeric failure
    CHECK(run(with({"verify", "--stage", "2", "--model", "glasses", "--samples", "10", "--seed", "1", "--out",
                    (out / "e").string()},
                   data_args())) == 3);
    CHECK_FALSE(fs::exists(out / "e"));
}

TEST_CASE("verify reports both values") {
    const auto out = scratch("verify");
    CHECK(run(with({"verify", "--stage", "1", "--model", "age", "--quad-points", "61", "--out", out.string()},
                   data_args())) == 0);
    const auto v = nlohmann::json::parse(slurp(out / "verify.json"));
    CHECK(v["pass"] == true);
    CHECK(std::abs(v["main_value"].get<double>() - v["oracle_value"].get<double>()) <= 0.1);
}

TEST_CASE("simulate from a config file") {
    blr::SimulationConfig c;
    c.seed = 5;
    c.n_patients = 30;
    c.covariates["x1"] = blr::Marginal{};
    c.stage1.coefficients["x1"] = 1.0;
    const auto dir = scratch("simcfg");
    fs::create_directories(dir);
    {
        std::ofstream(dir / "config.json") << blr::simulation_config_to_json(c);
        std::ofstream(dir / "schema.json") << blr::schema_to_json(blr::testing::continuous_schema(1));
    }
    const auto out = dir / "out";
    CHECK(run({"simulate", "--config", (dir / "config.json").string(), "--schema", (dir / "schema.json").string(),
               "--out", out.string()}) == 0);
    const auto again = dir / "again";
    CHECK(run({"simulate", "--config", (dir / "config.json").string(), "--schema", (dir / "schema.json").string(),
               "--out", again.string()}) == 0);
    CHECK(same_tree(out, again));
    CHECK(run({"summarize", "--patients", (out / "patients.csv").string(), "--falls", (out / "falls.csv").string(),
               "--schema", (out / "schema.json").string(), "--out", (dir / "summary").string()}) == 0);
}

TEST_CASE("the bundled example regenerates byte for byte") {
    const auto out = scratch("example");
    CHECK(run({"simulate", "--example", "--seed", "2019", "--out", out.string()}) == 0);
    CHECK(slurp(out / "patients.csv") == slurp(kData + "/patients.csv"));
    CHECK(slurp(out / "falls.csv") == slurp(kData + "/falls.csv"));
    CHECK(slurp(out / "schema.json") == slurp(kData + "/schema.json"));
}

TEST_CASE("select and cv are byte-identical across reruns and thread counts") {
    const std::vector<std::string> select{"select", "--stage", "1", "--pool", "age,bmi,tinetti_gait,fearful"};
    const auto s1 = scratch("select1");
    const auto s4 = scratch("select4");
    CHECK(run(with(with(select, data_args()), {"--threads", "1", "--out", s1.string()})) == 0);
    CHECK(run(with(with(select, data_args()), {"--threads", "4", "--out", s4.string()})) == 0);
    CHECK(same_tree(s1, s4));
    CHECK(slurp(s1 / "top_models.txt").find("Weight") != std::string::npos);

    const std::vector<std::string> cv{"cv",   "--stage", "2", "--model", "glasses", "--seed", "7", "--mc-sigma2-draws",
                                      "20", "--mc-epsilon-draws", "10"};
    const auto c1 = scratch("cv1");
    const auto c3 = scratch("cv3");
    CHECK(run(with(with(cv, data_args()), {"--threads", "1", "--out", c1.string()})) == 0);
    CHECK(run(with(with(cv, data_args()), {"--threads", "3", "--out", c3.string()})) == 0);
    CHECK(same_tree(c1, c3));
    CHECK(slurp(c1 / "loo_predictions.csv").rfind("row_id,label,probability,mc_se,fold\n", 0) == 0);
}
