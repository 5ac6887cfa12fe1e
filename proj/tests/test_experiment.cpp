#include "simudice/simudice.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace simudice;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "simudice_test_experiment" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig small_config() {
    return config_from_json(nlohmann::json::parse(R"({
        "environments": ["FrozenLake", "Taxi"],
        "epsilons": [0.1, 1.0],
        "dataset_sizes": [100],
        "algorithms": ["SimuDICE-F1", "DynaQ", "OfflineQ"],
        "planning_steps": [2],
        "seeds": 2,
        "eval_episodes": 20,
        "threads": 4
    })"));
}

std::vector<std::string> csv_lines(const std::vector<ResultRow>& rows, bool wall_time) {
    std::stringstream ss;
    write_results_csv(ss, rows, wall_time);
    std::vector<std::string> lines;
    for (std::string line; std::getline(ss, line);) lines.push_back(line);
    return lines;
}

std::size_t count_fields(const std::string& line) { return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1; }

}  // namespace

TEST(Config, DefaultsDescribeTheFullGrid) {
    const ExperimentConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.environments.size(), 3u);
    EXPECT_EQ(c.epsilons, (std::vector<double>{0.1, 0.4, 0.7}));
    EXPECT_EQ(c.dataset_sizes, std::vector<int>{500});
    EXPECT_EQ(c.seeds, 20);
    EXPECT_EQ(c.hyper.alpha, 0.1);
    EXPECT_EQ(c.hyper.gamma, 0.99);
    EXPECT_EQ(c.hyper.lambda, 1000.0);
    EXPECT_EQ(c.ablation_alpha, 0.05);
    EXPECT_EQ(c.partial_targets.at(EnvName::CliffWalking), -2.38);
}

TEST(Config, JsonOverrides) {
    const auto c = config_from_json(nlohmann::json::parse(R"({
        "environments": ["CliffWalking"], "seeds": 3, "master_seed": 17,
        "hyperparams": {"alpha": 0.2, "lambda": 50},
        "partial_training": {"targets": {"Taxi": 0.3}, "step_budget": 1000},
        "ablation": {"formulas": ["F2"], "planning_steps": [0, 1]}
    })"));
    EXPECT_EQ(c.environments, std::vector<EnvName>{EnvName::CliffWalking});
    EXPECT_EQ(c.seeds, 3);
    EXPECT_EQ(c.master_seed, 17u);
    EXPECT_EQ(c.hyper.alpha, 0.2);
    EXPECT_EQ(c.hyper.lambda, 50.0);
    EXPECT_EQ(c.hyper.gamma, 0.99);
    EXPECT_EQ(c.partial_targets.at(EnvName::Taxi), 0.3);
    EXPECT_EQ(c.partial.step_budget, 1000);
    EXPECT_EQ(c.ablation_formulas, std::vector<SamplingFormula>{SamplingFormula::F2});
    EXPECT_EQ(c.ablation_planning_steps, (std::vector<int>{0, 1}));
}

TEST(Config, RejectsBadInput) {
    auto parse = [](const char* text) { return config_from_json(nlohmann::json::parse(text)); };
    EXPECT_THROW(parse(R"({"enviroments": ["Taxi"]})"), std::invalid_argument);
    EXPECT_THROW(parse(R"({"environments": ["Pong"]})"), std::invalid_argument);
    EXPECT_THROW(parse(R"({"epsilons": []})"), std::invalid_argument);
    EXPECT_THROW(parse(R"({"epsilons": [1.5]})"), std::invalid_argument);
    EXPECT_THROW(parse(R"({"algorithms": ["PPO"]})"), std::invalid_argument);
    EXPECT_THROW(parse(R"({"seeds": 0})"), std::invalid_argument);
    EXPECT_THROW(parse(R"({"hyperparams": {"lambda": 0}})"), std::invalid_argument);
}

TEST(Config, LoadFromFile) {
    const auto dir = fresh_dir("config");
    std::ofstream(dir / "c.json") << R"({"seeds": 4})";
    EXPECT_EQ(load_config(dir / "c.json").seeds, 4);
    std::ofstream(dir / "bad.json") << "{ nope";
    EXPECT_THROW(load_config(dir / "bad.json"), std::invalid_argument);
    EXPECT_THROW(load_config(dir / "missing.json"), std::runtime_error);
}

TEST(Algorithms, LabelsRoundTrip) {
    for (const char* label : {"SimuDICE-F1", "SimuDICE-F2", "SimuDICE-F3", "DynaQ", "OfflineQ"})
        EXPECT_EQ(parse_algorithm(label).label(), label);
    EXPECT_EQ(parse_algorithm("SimuDICE"), parse_algorithm("SimuDICE-F1"));
    EXPECT_EQ(parse_algorithm("DynaQ").formula_name(), "Uniform");
    EXPECT_EQ(parse_algorithm("OfflineQ").formula_name(), "none");
    EXPECT_THROW(parse_algorithm("SimuDICE-F9"), std::invalid_argument);
}

TEST(Seeding, StreamsAreStableAndDistinct) {
    ExperimentConfig c;
    std::set<std::uint64_t> seeds;
    for (int k = 0; k < 20; ++k) seeds.insert(dataset_seed(c, EnvName::Taxi, 0.1, 500, k));
    seeds.insert(dataset_seed(c, EnvName::Taxi, 0.4, 500, 0));
    seeds.insert(dataset_seed(c, EnvName::FrozenLake, 0.1, 500, 0));
    EXPECT_EQ(seeds.size(), 22u);
    EXPECT_EQ(dataset_seed(c, EnvName::Taxi, 0.1, 500, 3), dataset_seed(ExperimentConfig{}, EnvName::Taxi, 0.1, 500, 3));
    c.master_seed = 1;
    EXPECT_NE(dataset_seed(c, EnvName::Taxi, 0.1, 500, 3), dataset_seed(ExperimentConfig{}, EnvName::Taxi, 0.1, 500, 3));
    EXPECT_EQ(dataset_path("d", EnvName::Taxi, 0.1, 500, 7).filename(), "Taxi_eps0.1_n500_seed7.jsonl");
}

TEST(ParallelFor, RunsEveryTaskOnceAndRethrows) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), 8, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(parallel_for(100, 4, [](std::size_t i) {
                     if (i == 37) throw std::runtime_error("boom");
                 }),
                 std::runtime_error);
}

TEST(Collect, WritesOneFilePerPointAndIsDeterministic) {
    const auto c = small_config();
    const auto first = fresh_dir("collect_a"), second = fresh_dir("collect_b");
    const auto summary = cmd_collect(c, first);
    cmd_collect(c, second);
    EXPECT_EQ(summary.files.size(), 2u * 2u * 1u * 2u);
    for (const auto& f : summary.files) {
        ASSERT_TRUE(fs::exists(f));
        EXPECT_EQ(read_file(f), read_file(second / f.filename()));
    }
    const auto d = load_dataset(dataset_path(first, EnvName::Taxi, 1.0, 100, 1), EnvName::Taxi);
    EXPECT_EQ(d.size(), 100u);
    EXPECT_EQ(d.behavior_epsilon, 1.0);
    EXPECT_EQ(d.collection_seed, dataset_seed(c, EnvName::Taxi, 1.0, 100, 1));
    EXPECT_TRUE(summary.partial_policies.at(EnvName::FrozenLake).within_tolerance);
}

class CompareTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new fs::path(fresh_dir("compare"));
        cmd_collect(small_config(), *dir_);
    }
    static void TearDownTestSuite() { delete dir_; }
    static fs::path* dir_;
};
fs::path* CompareTest::dir_ = nullptr;

TEST_F(CompareTest, RowCountIsCrossProductTimesSeeds) {
    const auto c = small_config();
    const auto rows = cmd_compare(c, *dir_);
    EXPECT_EQ(rows.size(), 2u * 2u * 1u * 3u * 1u * 1u * 2u);
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i - 1].sort_key(), rows[i].sort_key());
}

TEST_F(CompareTest, RowsRespectRewardBounds) {
    for (const auto& r : cmd_compare(small_config(), *dir_)) {
        const auto [lo, hi] = per_step_reward_bounds(*parse_env_name(r.env));
        EXPECT_GE(r.avg_per_step_reward, lo);
        EXPECT_LE(r.avg_per_step_reward, hi);
    }
}

TEST_F(CompareTest, RerunGivesIdenticalCsvModuloWallTime) {
    const auto c = small_config();
    EXPECT_EQ(csv_lines(cmd_compare(c, *dir_), false), csv_lines(cmd_compare(c, *dir_), false));
}

TEST_F(CompareTest, SinglePointReproducesItsSweepRow) {
    auto c = small_config();
    const auto rows = cmd_compare(c, *dir_);
    const RunPoint p{EnvName::Taxi, 1.0, 100, parse_algorithm("SimuDICE-F1"), 2, 1, 1, c.hyper.alpha};
    const auto d = load_dataset(dataset_path(*dir_, p.env, p.epsilon, p.dataset_size, p.seed));
    const auto alone = run_point(c, p, d);
    const auto it = std::find_if(rows.begin(), rows.end(), [&](const ResultRow& r) {
        return r.env == "Taxi" && r.epsilon == 1.0 && r.algorithm == "SimuDICE" && r.seed == 1;
    });
    ASSERT_NE(it, rows.end());
    EXPECT_EQ(alone.avg_per_step_reward, it->avg_per_step_reward);
    EXPECT_EQ(alone.diagnostics->w_mean, it->diagnostics->w_mean);

    c.environments = {EnvName::Taxi};
    c.epsilons = {1.0};
    c.algorithms = {parse_algorithm("SimuDICE-F1")};
    const auto narrow = cmd_compare(c, *dir_);
    ASSERT_EQ(narrow.size(), 2u);
    EXPECT_EQ(narrow[1].avg_per_step_reward, it->avg_per_step_reward);
}

TEST_F(CompareTest, CsvSchema) {
    const auto rows = cmd_compare(small_config(), *dir_);
    const auto lines = csv_lines(rows, true);
    ASSERT_EQ(lines.size(), rows.size() + 3);
    EXPECT_EQ(lines[0], "# schema=1");
    EXPECT_EQ(lines[1].rfind("# ", 0), 0u);
    EXPECT_EQ(lines[2], kCsvHeader);
    EXPECT_EQ(count_fields(lines[2]), 15u);
    for (std::size_t i = 3; i < lines.size(); ++i) {
        EXPECT_EQ(count_fields(lines[i]), 15u) << lines[i];
        const auto& r = rows[i - 3];
        if (r.algorithm == "OfflineQ") {
            EXPECT_TRUE(lines[i].ends_with(",,,,,")) << lines[i];
        } else if (r.algorithm == "DynaQ") {
            EXPECT_NE(lines[i].find(",,,,"), std::string::npos) << lines[i];
            EXPECT_FALSE(lines[i].ends_with(",")) << lines[i];
        } else {
            EXPECT_EQ(lines[i].find(",,"), std::string::npos) << lines[i];
        }
    }
}

TEST_F(CompareTest, AblationGrids) {
    auto c = small_config();
    c.environments = {EnvName::Taxi};
    c.ablation_planning_steps = {0, 3};
    c.ablation_iterations = {1, 2};
    const auto ps = cmd_ablate(c, AblationStudy::PlanningSteps, *dir_);
    EXPECT_EQ(ps.size(), 2u * 2u * 2u);
    for (const auto& r : ps) EXPECT_EQ(r.formula, "F1");
    const auto formulas = cmd_ablate(c, AblationStudy::Formulas, *dir_);
    EXPECT_EQ(formulas.size(), 2u * 3u * 2u);
    std::set<std::string> names;
    for (const auto& r : formulas) names.insert(r.formula);
    EXPECT_EQ(names, (std::set<std::string>{"F1", "F2", "F3"}));
    EXPECT_EQ(cmd_ablate(c, AblationStudy::Iterations, *dir_).size(), 2u * 2u * 2u);
    EXPECT_EQ(parse_ablation("formulas"), AblationStudy::Formulas);
    EXPECT_FALSE(parse_ablation("nope").has_value());
}

TEST(Compare, MissingDatasetIsAnError) {
    auto c = small_config();
    EXPECT_THROW(cmd_compare(c, fresh_dir("empty")), std::runtime_error);
}

TEST(RunPoint, WallClockGuard) {
    ExperimentConfig c;
    c.max_run_seconds = 1e-9;
    const auto spec = make_spec(EnvName::Taxi);
    Rng rng(1);
    const auto d = collect_dataset(spec, Policy::uniform(500, 6), 500, rng);
    const RunPoint p{EnvName::Taxi, 1.0, 500, parse_algorithm("SimuDICE-F1"), 10, 1, 0, 0.1};
    EXPECT_THROW(run_point(c, p, d), RunTimeout);
}

TEST(Summary, MeanVarianceAndStd) {
    std::vector<ResultRow> rows;
    for (double v : {1.0, 2.0, 3.0}) {
        ResultRow r;
        r.env = "Taxi";
        r.algorithm = "DynaQ";
        r.avg_per_step_reward = v;
        rows.push_back(r);
    }
    ResultRow lone;
    lone.env = "FrozenLake";
    lone.avg_per_step_reward = 0.5;
    rows.push_back(lone);
    const auto summary = summarize(rows);
    ASSERT_EQ(summary.size(), 2u);
    EXPECT_EQ(summary[0].env, "FrozenLake");
    EXPECT_EQ(summary[0].variance, 0.0);
    EXPECT_EQ(summary[1].n, 3);
    EXPECT_DOUBLE_EQ(summary[1].mean, 2.0);
    EXPECT_DOUBLE_EQ(summary[1].variance, 1.0);
    EXPECT_DOUBLE_EQ(summary[1].stddev, 1.0);
    std::stringstream ss;
    write_summary(ss, summary);
    EXPECT_NE(ss.str().find("variance"), std::string::npos);
}

TEST(PolicyFiles, RoundTripAndErrors) {
    const auto dir = fresh_dir("policy");
    Rng rng(3);
    QTable q(48, 4);
    for (Eigen::Index i = 0; i < q.values.size(); ++i) q.values(i) = rng.uniform();
    const auto pi = epsilon_greedy_policy(q, 0.3);
    save_policy(pi, EnvName::CliffWalking, dir / "p.json");
    const auto [env, loaded] = load_policy(dir / "p.json");
    EXPECT_EQ(env, EnvName::CliffWalking);
    EXPECT_EQ(loaded.probs, pi.probs);

    save_policy(Policy::uniform(16, 4), EnvName::CliffWalking, dir / "wrong_shape.json");
    EXPECT_THROW(load_policy(dir / "wrong_shape.json"), std::invalid_argument);
    std::ofstream(dir / "junk.json") << "[1,2";
    EXPECT_THROW(load_policy(dir / "junk.json"), std::invalid_argument);
}

#ifdef SIMUDICE_CLI_PATH
TEST(Cli, CollectCompareEvalOracle) {
    const auto dir = fresh_dir("cli");
    const std::string cli = SIMUDICE_CLI_PATH;
    std::ofstream(dir / "config.json") << R"({"epsilons": [0.4], "dataset_sizes": [60], "planning_steps": [1],
                                             "eval_episodes": 5})";
    const std::string common = " --config " + (dir / "config.json").string() + " --out " + (dir / "out").string() +
                               " --seeds 2 --master-seed 5 --env FrozenLake --quiet";
    ASSERT_EQ(std::system((cli + " collect" + common).c_str()), 0);
    ASSERT_EQ(std::system((cli + " compare" + common).c_str()), 0);
    const auto csv = read_file(dir / "out" / "results.csv");
    EXPECT_EQ(csv.rfind("# schema=1\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3 + 3 * 2);
    EXPECT_TRUE(fs::exists(dir / "out" / "summary.txt"));

    const auto dataset = dataset_path(dir / "out" / "datasets", EnvName::FrozenLake, 0.4, 60, 0);
    const auto policy = dir / "policy.json";
    ASSERT_EQ(std::system((cli + " eval --quiet --episodes 5 --dataset " + dataset.string() + " --save-policy " +
                           policy.string() + " > " + (dir / "eval.txt").string())
                              .c_str()),
              0);
    EXPECT_TRUE(fs::exists(policy));
    const double value = std::stod(read_file(dir / "eval.txt"));
    EXPECT_GE(value, 0.0);
    EXPECT_LE(value, 1.0);
    EXPECT_EQ(std::system((cli + " oracle --env FrozenLake --policy " + policy.string() + " > /dev/null").c_str()), 0);
    EXPECT_NE(std::system((cli + " oracle --env CliffWalking --policy " + policy.string() + " > /dev/null 2>&1").c_str()), 0);
    EXPECT_NE(std::system((cli + " compare --env Pong --quiet --out " + (dir / "x").string() + " > /dev/null 2>&1").c_str()), 0);
    EXPECT_NE(std::system((cli + " compare --quiet --out " + (dir / "nothing").string() + " > /dev/null 2>&1").c_str()), 0);
}
#endif
