#pragma once

#include "simudice/algorithms.hpp"
#include "simudice/dataset.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace simudice {

enum class AlgorithmKind { SimuDICE, DynaQ, OfflineQ };

struct AlgorithmSpec {
    AlgorithmKind kind = AlgorithmKind::SimuDICE;
    SamplingFormula formula = SamplingFormula::F1;

    [[nodiscard]] std::string name() const {
        switch (kind) {
            case AlgorithmKind::SimuDICE: return "SimuDICE";
            case AlgorithmKind::DynaQ: return "DynaQ";
            case AlgorithmKind::OfflineQ: return "OfflineQ";
        }
        return "SimuDICE";
    }
    [[nodiscard]] std::string formula_name() const {
        switch (kind) {
            case AlgorithmKind::SimuDICE: return std::string(to_string(formula));
            case AlgorithmKind::DynaQ: return "Uniform";
            case AlgorithmKind::OfflineQ: return "none";
        }
        return "none";
    }
    /// Config/CLI label, e.g. "SimuDICE-F2".
    [[nodiscard]] std::string label() const {
        return kind == AlgorithmKind::SimuDICE ? name() + "-" + formula_name() : name();
    }
    friend bool operator==(const AlgorithmSpec&, const AlgorithmSpec&) = default;
};

inline AlgorithmSpec parse_algorithm(std::string_view text) {
    if (text == "DynaQ") return {AlgorithmKind::DynaQ, SamplingFormula::Uniform};
    if (text == "OfflineQ") return {AlgorithmKind::OfflineQ, SamplingFormula::Uniform};
    if (text == "SimuDICE") return {AlgorithmKind::SimuDICE, SamplingFormula::F1};
    if (text.starts_with("SimuDICE-")) {
        if (auto f = parse_formula(text.substr(9))) return {AlgorithmKind::SimuDICE, *f};
    }
    throw std::invalid_argument("unknown algorithm '" + std::string(text) + "'");
}

/// Canonical text of an epsilon value for keys and file names ("0.1", "1").
inline std::string format_epsilon(double eps) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", eps);
    return buf;
}

struct ExperimentConfig {
    std::vector<EnvName> environments{EnvName::Taxi, EnvName::FrozenLake, EnvName::CliffWalking};
    std::vector<double> epsilons{0.1, 0.4, 0.7};
    std::vector<int> dataset_sizes{500};
    std::vector<AlgorithmSpec> algorithms{parse_algorithm("SimuDICE-F1"), parse_algorithm("DynaQ"),
                                          parse_algorithm("OfflineQ")};
    std::vector<int> planning_steps_list{10, 20};
    std::vector<int> iterations_list{1};
    int seeds = 20;
    std::uint64_t master_seed = 0;
    Hyperparams hyper;
    int eval_episodes = 500;
    int max_episode_steps = 100;
    int threads = 0;  // 0: hardware concurrency
    double max_run_seconds = 60.0;

    std::map<EnvName, double> partial_targets{
        {EnvName::Taxi, 0.1}, {EnvName::FrozenLake, 0.0}, {EnvName::CliffWalking, -2.38}};
    PartialTrainingOptions partial;

    double ablation_alpha = 0.05;
    std::vector<int> ablation_planning_steps{0, 5, 10, 20, 40};
    std::vector<int> ablation_iterations{1, 2, 4, 8};
    std::vector<SamplingFormula> ablation_formulas{SamplingFormula::F1, SamplingFormula::F2, SamplingFormula::F3};

    void validate() const {
        if (environments.empty() || epsilons.empty() || dataset_sizes.empty() || algorithms.empty() ||
            planning_steps_list.empty() || iterations_list.empty())
            throw std::invalid_argument("config: every sweep list must be non-empty");
        for (auto env : environments)
            if (env == EnvName::Custom) throw std::invalid_argument("config: unknown environment");
        for (double e : epsilons)
            if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("config: epsilon outside [0, 1]");
        for (int n : dataset_sizes)
            if (n < 1) throw std::invalid_argument("config: dataset sizes must be >= 1");
        if (seeds < 1) throw std::invalid_argument("config: seeds must be >= 1");
        if (eval_episodes < 1) throw std::invalid_argument("config: eval_episodes must be >= 1");
        if (max_episode_steps < 1) throw std::invalid_argument("config: max_episode_steps must be >= 1");
        hyper.validate();
    }
};

/// Every key accepted in a config file, for --help.
inline constexpr std::string_view kConfigKeys =
    "Config keys (JSON object):\n"
    "  environments       list of \"Taxi\" | \"FrozenLake\" | \"CliffWalking\"\n"
    "  epsilons           list of behavior epsilons in [0,1]\n"
    "  dataset_sizes      list of dataset sizes (timesteps)\n"
    "  algorithms         list of \"SimuDICE-F1|F2|F3\" | \"SimuDICE\" | \"DynaQ\" | \"OfflineQ\"\n"
    "  planning_steps     list of planning steps per real experience\n"
    "  iterations         list of outer-loop iteration counts\n"
    "  seeds              number of seeds per config point\n"
    "  master_seed        root of every random stream\n"
    "  eval_episodes      evaluation rollouts per run\n"
    "  max_episode_steps  episode cap for collection and evaluation\n"
    "  threads            worker threads (0 = hardware)\n"
    "  max_run_seconds    wall-time guard per run\n"
    "  hyperparams        {alpha, gamma, lambda, replay_epochs, ridge}\n"
    "  partial_training   {targets: {env: value}, tolerance, eval_every, step_budget, eval_episodes, alpha, gamma, exploration}\n"
    "  ablation           {alpha, planning_steps, iterations, formulas}\n";

namespace detail {

template <class T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    static const std::vector<std::string> known{"environments", "epsilons", "dataset_sizes", "algorithms",
                                                "planning_steps", "iterations", "seeds", "master_seed",
                                                "eval_episodes", "max_episode_steps", "threads", "max_run_seconds",
                                                "hyperparams", "partial_training", "ablation"};
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::invalid_argument("config: unknown key '" + key + "'");
    if (j.contains("environments")) {
        c.environments.clear();
        for (const auto& e : j.at("environments")) {
            auto name = parse_env_name(e.get<std::string>());
            if (!name) throw std::invalid_argument("config: unknown environment '" + e.get<std::string>() + "'");
            c.environments.push_back(*name);
        }
    }
    detail::read_if(j, "epsilons", c.epsilons);
    detail::read_if(j, "dataset_sizes", c.dataset_sizes);
    if (j.contains("algorithms")) {
        c.algorithms.clear();
        for (const auto& a : j.at("algorithms")) c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
    }
    detail::read_if(j, "planning_steps", c.planning_steps_list);
    detail::read_if(j, "iterations", c.iterations_list);
    detail::read_if(j, "seeds", c.seeds);
    detail::read_if(j, "master_seed", c.master_seed);
    detail::read_if(j, "eval_episodes", c.eval_episodes);
    detail::read_if(j, "max_episode_steps", c.max_episode_steps);
    detail::read_if(j, "threads", c.threads);
    detail::read_if(j, "max_run_seconds", c.max_run_seconds);
    if (j.contains("hyperparams")) {
        const auto& h = j.at("hyperparams");
        detail::read_if(h, "alpha", c.hyper.alpha);
        detail::read_if(h, "gamma", c.hyper.gamma);
        detail::read_if(h, "lambda", c.hyper.lambda);
        detail::read_if(h, "replay_epochs", c.hyper.replay_epochs);
        detail::read_if(h, "ridge", c.hyper.ridge);
    }
    if (j.contains("partial_training")) {
        const auto& p = j.at("partial_training");
        if (p.contains("targets")) {
            for (const auto& [env, value] : p.at("targets").items()) {
                auto name = parse_env_name(env);
                if (!name) throw std::invalid_argument("config: unknown environment '" + env + "' in targets");
                c.partial_targets[*name] = value.get<double>();
            }
        }
        detail::read_if(p, "tolerance", c.partial.tolerance);
        detail::read_if(p, "eval_every", c.partial.eval_every);
        detail::read_if(p, "step_budget", c.partial.step_budget);
        detail::read_if(p, "eval_episodes", c.partial.eval_episodes);
        detail::read_if(p, "alpha", c.partial.alpha);
        detail::read_if(p, "gamma", c.partial.gamma);
        detail::read_if(p, "exploration", c.partial.exploration);
    }
    if (j.contains("ablation")) {
        const auto& a = j.at("ablation");
        detail::read_if(a, "alpha", c.ablation_alpha);
        detail::read_if(a, "planning_steps", c.ablation_planning_steps);
        detail::read_if(a, "iterations", c.ablation_iterations);
        if (a.contains("formulas")) {
            c.ablation_formulas.clear();
            for (const auto& f : a.at("formulas")) {
                auto formula = parse_formula(f.get<std::string>());
                if (!formula) throw std::invalid_argument("config: unknown formula '" + f.get<std::string>() + "'");
                c.ablation_formulas.push_back(*formula);
            }
        }
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    try {
        return config_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config " + path.string() + ": " + e.what());
    }
}

// --- seeding ---------------------------------------------------------------

inline std::uint64_t partial_policy_seed(const ExperimentConfig& c, EnvName env) {
    return split_seed(c.master_seed, fnv1a("partial|" + std::string(to_string(env))), 0);
}

inline std::string dataset_key(EnvName env, double eps, int size) {
    return std::string(to_string(env)) + "|" + format_epsilon(eps) + "|" + std::to_string(size);
}

inline std::uint64_t dataset_seed(const ExperimentConfig& c, EnvName env, double eps, int size, int seed_index) {
    return split_seed(c.master_seed, fnv1a("dataset|" + dataset_key(env, eps, size)), static_cast<std::uint64_t>(seed_index));
}

inline std::filesystem::path dataset_path(const std::filesystem::path& dir, EnvName env, double eps, int size,
                                          int seed_index) {
    return dir / (std::string(to_string(env)) + "_eps" + format_epsilon(eps) + "_n" + std::to_string(size) + "_seed" +
                  std::to_string(seed_index) + ".jsonl");
}

/// One (configuration point, seed) unit of work.
struct RunPoint {
    EnvName env = EnvName::Taxi;
    double epsilon = 0.1;
    int dataset_size = 500;
    AlgorithmSpec algorithm;
    int planning_steps = 10;
    int iterations = 1;
    int seed = 0;
    double alpha = 0.1;

    [[nodiscard]] std::string key() const {
        return dataset_key(env, epsilon, dataset_size) + "|" + algorithm.label() + "|" + std::to_string(planning_steps) +
               "|" + std::to_string(iterations) + "|" + format_epsilon(alpha);
    }
};

struct ResultRow {
    std::string env;
    double epsilon = 0.0;
    int dataset_size = 0;
    std::string algorithm;
    std::string formula;
    int planning_steps = 0;
    int iterations = 0;
    int seed = 0;
    double avg_per_step_reward = 0.0;
    long wall_time_ms = 0;
    std::optional<IterationDiagnostics> diagnostics;

    [[nodiscard]] auto sort_key() const {
        return std::tie(env, epsilon, dataset_size, algorithm, formula, planning_steps, iterations, seed);
    }
};

/// Per-step reward range of each environment; every evaluation must fall inside.
inline std::pair<double, double> per_step_reward_bounds(EnvName env) {
    switch (env) {
        case EnvName::Taxi: return {-10.0, 20.0};
        case EnvName::FrozenLake: return {0.0, 1.0};
        case EnvName::CliffWalking: return {-100.0, 0.0};
        case EnvName::Custom: break;
    }
    throw std::invalid_argument("per_step_reward_bounds: unsupported environment");
}

class RunTimeout : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Trains the point's learner on `d` and evaluates it in the real environment.
inline ResultRow run_point(const ExperimentConfig& c, const RunPoint& p, const Dataset& d) {
    const auto started = std::chrono::steady_clock::now();
    Hyperparams h = c.hyper;
    h.alpha = p.alpha;
    h.planning_steps = p.planning_steps;
    h.iterations = p.iterations;
    h.formula = p.algorithm.formula;

    Rng learner_rng(split_seed(c.master_seed, fnv1a("learner|" + p.key()), static_cast<std::uint64_t>(p.seed)));
    Rng eval_rng(split_seed(c.master_seed, fnv1a("eval|" + p.key()), static_cast<std::uint64_t>(p.seed)));

    ResultRow row;
    row.env = std::string(to_string(p.env));
    row.epsilon = p.epsilon;
    row.dataset_size = p.dataset_size;
    row.algorithm = p.algorithm.name();
    row.formula = p.algorithm.formula_name();
    row.planning_steps = p.planning_steps;
    row.iterations = p.iterations;
    row.seed = p.seed;

    Policy policy;
    switch (p.algorithm.kind) {
        case AlgorithmKind::OfflineQ: policy = greedy_policy(offline_q_learning(d, h, learner_rng)); break;
        case AlgorithmKind::DynaQ: {
            auto result = run_offline_dyna_q(d, h, learner_rng);
            row.diagnostics = result.diagnostics.back();
            policy = std::move(result.policy);
            break;
        }
        case AlgorithmKind::SimuDICE: {
            auto result = run_simudice(d, h, learner_rng);
            row.diagnostics = result.diagnostics.back();
            policy = std::move(result.policy);
            break;
        }
    }
    row.avg_per_step_reward = evaluate_policy(d.env_spec, policy, c.eval_episodes, c.max_episode_steps, eval_rng);
    const auto elapsed = std::chrono::steady_clock::now() - started;
    row.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();

    if (std::chrono::duration<double>(elapsed).count() > c.max_run_seconds)
        throw RunTimeout("run " + p.key() + " seed " + std::to_string(p.seed) + " took " +
                         std::to_string(row.wall_time_ms) + " ms, over the " + std::to_string(c.max_run_seconds) +
                         " s budget");
    const auto [lo, hi] = per_step_reward_bounds(p.env);
    if (row.avg_per_step_reward < lo || row.avg_per_step_reward > hi)
        throw std::logic_error("run " + p.key() + ": per-step reward outside environment bounds");
    return row;
}

/// Runs `n` independent tasks on a pool of `threads` workers pulling from a shared counter.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& task) {
    const auto workers = static_cast<std::size_t>(
        std::max(1, threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency())));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < std::min(workers, n); ++w) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

// --- commands --------------------------------------------------------------

struct CollectSummary {
    std::map<EnvName, PartialPolicy> partial_policies;
    std::vector<std::filesystem::path> files;
};

/// Trains one partial policy per environment and writes every (env, eps, size, seed) dataset.
inline CollectSummary cmd_collect(const ExperimentConfig& c, const std::filesystem::path& dataset_dir) {
    c.validate();
    std::filesystem::create_directories(dataset_dir);
    CollectSummary summary;
    for (auto env : c.environments) {
        Rng rng(partial_policy_seed(c, env));
        auto partial = train_partial_policy(make_spec(env, c.max_episode_steps), c.partial_targets.at(env), rng, c.partial);
        if (!partial.within_tolerance)
            spdlog::warn("collect: {} partial policy off target ({:.4f} vs {:.4f})", to_string(env), partial.achieved,
                         c.partial_targets.at(env));
        summary.partial_policies.emplace(env, std::move(partial));
    }
    struct Job {
        EnvName env;
        double eps;
        int size;
        int seed;
    };
    std::vector<Job> jobs;
    for (auto env : c.environments)
        for (double eps : c.epsilons)
            for (int size : c.dataset_sizes)
                for (int seed = 0; seed < c.seeds; ++seed) jobs.push_back({env, eps, size, seed});
    summary.files.resize(jobs.size());
    parallel_for(jobs.size(), c.threads, [&](std::size_t i) {
        const auto& job = jobs[i];
        const auto spec = make_spec(job.env, c.max_episode_steps);
        const auto behavior = epsilon_greedy_policy(summary.partial_policies.at(job.env).q, job.eps);
        const auto seed = dataset_seed(c, job.env, job.eps, job.size, job.seed);
        Rng rng(seed);
        auto d = collect_dataset(spec, behavior, job.size, rng);
        d.behavior_epsilon = job.eps;
        d.collection_seed = seed;
        summary.files[i] = dataset_path(dataset_dir, job.env, job.eps, job.size, job.seed);
        save_dataset(d, summary.files[i]);
    });
    return summary;
}

/// Cross product of the sweep lists for the given algorithms.
inline std::vector<RunPoint> expand_points(const ExperimentConfig& c, const std::vector<AlgorithmSpec>& algorithms,
                                           const std::vector<int>& planning_steps, const std::vector<int>& iterations,
                                           double alpha) {
    std::vector<RunPoint> points;
    for (auto env : c.environments)
        for (double eps : c.epsilons)
            for (int size : c.dataset_sizes)
                for (const auto& algo : algorithms)
                    for (int ps : planning_steps)
                        for (int it : iterations)
                            for (int seed = 0; seed < c.seeds; ++seed)
                                points.push_back({env, eps, size, algo, ps, it, seed, alpha});
    return points;
}

/// Runs every point against the datasets in `dataset_dir`; rows come back canonically sorted.
inline std::vector<ResultRow> run_points(const ExperimentConfig& c, const std::vector<RunPoint>& points,
                                         const std::filesystem::path& dataset_dir) {
    std::map<std::filesystem::path, Dataset> datasets;
    for (const auto& p : points) {
        const auto path = dataset_path(dataset_dir, p.env, p.epsilon, p.dataset_size, p.seed);
        if (datasets.contains(path)) continue;
        if (!std::filesystem::exists(path))
            throw std::runtime_error("missing dataset file " + path.string() + " (run `collect` first)");
        datasets.emplace(path, load_dataset(path, p.env));
    }
    std::vector<ResultRow> rows(points.size());
    parallel_for(points.size(), c.threads, [&](std::size_t i) {
        const auto& p = points[i];
        rows[i] = run_point(c, p, datasets.at(dataset_path(dataset_dir, p.env, p.epsilon, p.dataset_size, p.seed)));
    });
    std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) { return a.sort_key() < b.sort_key(); });
    return rows;
}

inline std::vector<ResultRow> cmd_compare(const ExperimentConfig& c, const std::filesystem::path& dataset_dir) {
    c.validate();
    return run_points(c, expand_points(c, c.algorithms, c.planning_steps_list, c.iterations_list, c.hyper.alpha),
                      dataset_dir);
}

enum class AblationStudy { PlanningSteps, Formulas, Iterations };

inline std::optional<AblationStudy> parse_ablation(std::string_view text) {
    if (text == "planning_steps") return AblationStudy::PlanningSteps;
    if (text == "formulas") return AblationStudy::Formulas;
    if (text == "iterations") return AblationStudy::Iterations;
    return std::nullopt;
}

/// Ablation grids, all SimuDICE with the ablation learning rate:
/// planning steps (F1, 1 iteration), formulas (PS 10, 1 iteration), iterations (F1, PS 10).
inline std::vector<ResultRow> cmd_ablate(const ExperimentConfig& c, AblationStudy study,
                                         const std::filesystem::path& dataset_dir) {
    c.validate();
    const AlgorithmSpec f1{AlgorithmKind::SimuDICE, SamplingFormula::F1};
    std::vector<RunPoint> points;
    switch (study) {
        case AblationStudy::PlanningSteps:
            points = expand_points(c, {f1}, c.ablation_planning_steps, {1}, c.ablation_alpha);
            break;
        case AblationStudy::Formulas: {
            std::vector<AlgorithmSpec> algos;
            for (auto f : c.ablation_formulas) algos.push_back({AlgorithmKind::SimuDICE, f});
            points = expand_points(c, algos, {10}, {1}, c.ablation_alpha);
            break;
        }
        case AblationStudy::Iterations:
            points = expand_points(c, {f1}, {10}, c.ablation_iterations, c.ablation_alpha);
            break;
    }
    return run_points(c, points, dataset_dir);
}

// --- output ----------------------------------------------------------------

inline constexpr std::string_view kCsvHeader =
    "env,epsilon,dataset_size,algorithm,formula,planning_steps,iterations,seed,avg_per_step_reward,wall_time_ms,"
    "w_min,w_mean,w_max,p_entropy,q_change_norm";

namespace detail {

inline std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace detail

/// schema=1 CSV. Diagnostic columns are empty for runs without a planning phase.
inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows, bool include_wall_time = true) {
    out << "# schema=1\n";
    out << "# F3 uniform term is 1/K over model-known pairs (unknown pairs cannot be simulated)\n";
    out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        out << r.env << ',' << format_epsilon(r.epsilon) << ',' << r.dataset_size << ',' << r.algorithm << ','
            << r.formula << ',' << r.planning_steps << ',' << r.iterations << ',' << r.seed << ','
            << detail::format_real(r.avg_per_step_reward) << ',' << (include_wall_time ? r.wall_time_ms : 0);
        if (r.diagnostics) {
            const auto& d = *r.diagnostics;
            const bool has_w = r.algorithm == "SimuDICE";
            out << ',' << (has_w ? detail::format_real(d.w_min) : "") << ',' << (has_w ? detail::format_real(d.w_mean) : "")
                << ',' << (has_w ? detail::format_real(d.w_max) : "") << ',' << detail::format_real(d.p_entropy) << ','
                << detail::format_real(d.q_change_norm);
        } else {
            out << ",,,,,";
        }
        out << '\n';
    }
}

struct SummaryRow {
    std::string env;
    double epsilon;
    int dataset_size;
    std::string algorithm;
    std::string formula;
    int planning_steps;
    int iterations;
    int n;
    double mean;
    double variance;  // sample variance across seeds, 0 for a single seed
    double stddev;
};

inline std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
    std::map<std::tuple<std::string, double, int, std::string, std::string, int, int>, std::vector<double>> groups;
    for (const auto& r : rows)
        groups[{r.env, r.epsilon, r.dataset_size, r.algorithm, r.formula, r.planning_steps, r.iterations}].push_back(
            r.avg_per_step_reward);
    std::vector<SummaryRow> out;
    for (const auto& [key, values] : groups) {
        const auto n = static_cast<double>(values.size());
        const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        const double var = values.size() > 1 ? ss / (n - 1.0) : 0.0;
        const auto& [env, eps, size, algo, formula, ps, it] = key;
        out.push_back({env, eps, size, algo, formula, ps, it, static_cast<int>(values.size()), mean, var, std::sqrt(var)});
    }
    return out;
}

inline void write_summary(std::ostream& out, const std::vector<SummaryRow>& summary) {
    char line[256];
    std::snprintf(line, sizeof line, "%-13s %-7s %-6s %-9s %-8s %-4s %-4s %-5s %-11s %-11s %-11s\n", "env", "eps", "size",
                  "algorithm", "formula", "ps", "it", "n", "mean", "variance", "stddev");
    out << line;
    for (const auto& s : summary) {
        std::snprintf(line, sizeof line, "%-13s %-7s %-6d %-9s %-8s %-4d %-4d %-5d %-11.5f %-11.3e %-11.5f\n",
                      s.env.c_str(), format_epsilon(s.epsilon).c_str(), s.dataset_size, s.algorithm.c_str(),
                      s.formula.c_str(), s.planning_steps, s.iterations, s.n, s.mean, s.variance, s.stddev);
        out << line;
    }
}

// --- policy files ----------------------------------------------------------

inline void save_policy(const Policy& pi, EnvName env, const std::filesystem::path& path) {
    nlohmann::json probs = nlohmann::json::array();
    for (StateId s = 0; s < pi.n_states(); ++s) {
        nlohmann::json row = nlohmann::json::array();
        for (ActionId a = 0; a < pi.n_actions(); ++a) row.push_back(pi(s, a));
        probs.push_back(std::move(row));
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_policy: cannot open " + path.string());
    out << nlohmann::json{{"env", to_string(env)}, {"n_states", pi.n_states()}, {"n_actions", pi.n_actions()},
                          {"probs", probs}}
               .dump()
        << '\n';
}

inline std::pair<EnvName, Policy> load_policy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_policy: cannot open " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        const auto env = parse_env_name(j.at("env").get<std::string>());
        if (!env) throw std::invalid_argument("load_policy: unknown environment");
        const auto spec = make_spec(*env);
        const int S = j.at("n_states").get<int>(), A = j.at("n_actions").get<int>();
        if (S != spec.n_states || A != spec.n_actions) throw std::invalid_argument("load_policy: shape mismatch");
        Eigen::MatrixXd probs(S, A);
        const auto& rows = j.at("probs");
        if (rows.size() != static_cast<std::size_t>(S)) throw std::invalid_argument("load_policy: wrong row count");
        for (StateId s = 0; s < S; ++s) {
            if (rows[s].size() != static_cast<std::size_t>(A)) throw std::invalid_argument("load_policy: wrong row width");
            for (ActionId a = 0; a < A; ++a) probs(s, a) = rows[s][a].get<double>();
        }
        Policy pi(std::move(probs));
        if (!pi.is_valid(1e-9)) throw std::invalid_argument("load_policy: rows are not distributions");
        return {*env, std::move(pi)};
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("load_policy: malformed file " + path.string() + ": " + e.what());
    }
}

}  // namespace simudice
