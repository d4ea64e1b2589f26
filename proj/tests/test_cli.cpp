#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "apnav/config.hpp"

namespace fs = std::filesystem;
using namespace apnav;

namespace {

struct CliRun {
    int code;
    std::string err;
};

class CliTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("apnav_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        write(config_path(), small_config().dump(1));
    }

    void TearDown() override { fs::remove_all(dir_); }

    static json small_config()
    {
        return {{"world", {{"n_angles", 16}, {"n_radii", 8}, {"r_min", 1.0}, {"r_max", 40.0}, {"obs_dim", 8}}},
                {"training", {{"hidden", {16}}, {"epochs", 5}}},
                {"classifier", {{"hidden", {16}}, {"epochs", 5}}},
                {"eval", {{"n_trials", 12}}}};
    }

    std::string config_path() const { return (dir_ / "config.json").string(); }
    fs::path out(const std::string& name = "out") const { return dir_ / name; }

    static void write(const fs::path& p, const std::string& text)
    {
        std::ofstream(p) << text;
    }

    static std::string slurp(const fs::path& p)
    {
        std::ifstream is(p, std::ios::binary);
        std::ostringstream os;
        os << is.rdbuf();
        return os.str();
    }

    CliRun run(const std::string& args) const
    {
        const fs::path err = dir_ / "stderr.txt";
        const std::string cmd = std::string(APNAV_CLI_PATH) + " " + args + " 2> " + err.string() + " > /dev/null";
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
    }

    std::string base(const std::string& outdir = "out") const
    {
        return "--config " + config_path() + " --out " + out(outdir).string();
    }

    fs::path dir_;
};

} // namespace

TEST_F(CliTest, ManifoldWritesCsvAndSidecar)
{
    ASSERT_EQ(run("manifold " + base()).code, 0);
    std::ifstream is(out() / "manifold.csv");
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "theta,r,confidence");
    std::size_t rows = 0;
    while (std::getline(is, line))
        ++rows;
    EXPECT_EQ(rows, 16u * 8u);
    const auto meta = json::parse(slurp(out() / "manifold.csv.meta.json"));
    EXPECT_EQ(meta["schema_version"], kSchemaVersion);
    EXPECT_EQ(meta["master_seed"], 1);
    EXPECT_EQ(meta["config_hash"], config_hash(load_config(config_path())));
}

TEST_F(CliTest, FullGridManifoldHasEveryPose)
{
    ASSERT_EQ(run("manifold --out " + out().string()).code, 0);
    std::ifstream is(out() / "manifold.csv");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(is, line))
        ++rows;
    EXPECT_EQ(rows, 4941u);
}

TEST_F(CliTest, ManifoldIsReproducible)
{
    ASSERT_EQ(run("manifold --preset person " + base("a")).code, 0);
    ASSERT_EQ(run("manifold --preset person " + base("b")).code, 0);
    EXPECT_EQ(slurp(out("a") / "manifold.csv"), slurp(out("b") / "manifold.csv"));
    ASSERT_EQ(run("manifold " + base("c")).code, 0);
    EXPECT_NE(slurp(out("a") / "manifold.csv"), slurp(out("c") / "manifold.csv"));
}

TEST_F(CliTest, ChainIsByteIdentical)
{
    for (const char* o : {"a", "b"}) {
        ASSERT_EQ(run("labels " + base(o) + " --seed 5").code, 0);
        ASSERT_EQ(run("train " + base(o) + " --seed 5").code, 0);
        const auto r = run("eval " + base(o) + " --seed 5 --jobs 2");
        ASSERT_EQ(r.code, 0) << r.err;
    }
    for (const char* f : {"dataset.jsonl", "model.json", "classifier.json", "train_report.json", "report.json",
                          "report.csv"})
        EXPECT_EQ(slurp(out("a") / f), slurp(out("b") / f)) << f;
    const auto report = json::parse(slurp(out("a") / "report.json"));
    EXPECT_EQ(report["master_seed"], 5);
    EXPECT_EQ(report["policies"].size(), 4u);
    EXPECT_EQ(report["policies"][0]["success_rate"], 0.0);
}

TEST_F(CliTest, EpisodeWithStaticPolicy)
{
    const auto r = run("episode --policy static --pose 1.0,20 " + base());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(slurp(out() / "episode.json"));
    EXPECT_EQ(j["p_final"], j["p_init"]);
    EXPECT_EQ(j["success"], false);
    EXPECT_EQ(j["config_hash"], config_hash(load_config(config_path())));
}

TEST_F(CliTest, EvalWithoutModelIsMissingInput)
{
    const auto r = run("eval " + base());
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("model"), std::string::npos);
}

TEST_F(CliTest, BadConfigKeyIsUsageError)
{
    write(dir_ / "bad.json", R"({"world": {"n_angels": 3}})");
    const auto r = run("manifold --config " + (dir_ / "bad.json").string() + " --out " + out().string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("world.n_angels"), std::string::npos);
}

TEST_F(CliTest, UsageErrors)
{
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("fly").code, 2);
    EXPECT_EQ(run("episode --pose 1 " + base()).code, 2);
    EXPECT_EQ(run("manifold --preset truck " + base()).code, 2);
    EXPECT_EQ(run("--help").code, 0);
}

TEST_F(CliTest, MissingFileSchemaMismatchAndEmptyDatasetAreDistinct)
{
    EXPECT_EQ(run("manifold --config " + (dir_ / "nope.json").string()).code, 3);
    EXPECT_EQ(run("train " + base() + " --dataset " + (dir_ / "nope.jsonl").string()).code, 3);

    write(dir_ / "garbage.jsonl", "{\"schema_version\": 1}\n");
    EXPECT_EQ(run("train " + base() + " --dataset " + (dir_ / "garbage.jsonl").string()).code, 4);

    ASSERT_EQ(run("labels " + base() + " --seed 3").code, 0);
    // Dataset generated under another seed has a different encoder.
    EXPECT_EQ(run("train " + base() + " --seed 4").code, 4);

    std::ifstream is(out() / "dataset.jsonl");
    std::string header;
    std::getline(is, header);
    json h = json::parse(header);
    h["n_records"] = 0;
    write(dir_ / "empty.jsonl", h.dump() + "\n");
    const auto r = run("train " + base() + " --seed 3 --dataset " + (dir_ / "empty.jsonl").string());
    EXPECT_EQ(r.code, 5) << r.err;
}
