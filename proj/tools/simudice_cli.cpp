// Command-line harness: dataset collection, algorithm comparison, ablations,
// policy evaluation and exact oracles.

#include "simudice/simudice.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace simudice;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<int> seeds;
    std::optional<std::uint64_t> master_seed;
    std::vector<std::string> envs;
    std::optional<int> threads;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_path, "JSON config file (keys listed in --help footer)")->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--seeds", o.seeds, "Seeds per configuration point");
    cmd->add_option("--master-seed", o.master_seed, "Master seed for every random stream");
    cmd->add_option("--env", o.envs, "Environment(s): Taxi, FrozenLake, CliffWalking");
    cmd->add_option("--threads", o.threads, "Worker threads (0 = hardware)");
    cmd->add_flag("--quiet", o.quiet, "Only print warnings and errors");
}

/// Config file first, then CLI overrides. `default_envs` applies when neither names environments.
ExperimentConfig resolve_config(const CommonOptions& o, std::optional<std::vector<EnvName>> default_envs = std::nullopt) {
    nlohmann::json j = nlohmann::json::object();
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        j = nlohmann::json::parse(in);
    }
    if (!j.contains("environments") && default_envs) {
        j["environments"] = nlohmann::json::array();
        for (auto e : *default_envs) j["environments"].push_back(to_string(e));
    }
    if (!o.envs.empty()) j["environments"] = o.envs;
    if (o.seeds) j["seeds"] = *o.seeds;
    if (o.master_seed) j["master_seed"] = *o.master_seed;
    if (o.threads) j["threads"] = *o.threads;
    return config_from_json(j);
}

void emit_results(const CommonOptions& o, const std::vector<ResultRow>& rows) {
    fs::create_directories(o.out_dir);
    const auto csv_path = fs::path(o.out_dir) / "results.csv";
    const auto summary_path = fs::path(o.out_dir) / "summary.txt";
    std::ofstream csv(csv_path);
    write_results_csv(csv, rows);
    const auto summary = summarize(rows);
    std::ofstream txt(summary_path);
    write_summary(txt, summary);
    if (!o.quiet) {
        write_summary(std::cout, summary);
        std::cout << rows.size() << " rows -> " << csv_path.string() << '\n';
    }
}

EnvName require_env(const std::string& name) {
    auto env = parse_env_name(name);
    if (!env) throw CLI::ValidationError("--env", "unknown environment '" + name + "'");
    return *env;
}

void print_oracle_line(const char* label, const TabularMdp& mdp, const Policy& pi) {
    const double rho = policy_value_exact(mdp, pi);
    const auto d = visitation_distribution_exact(mdp, pi);
    double terminal_mass = 0.0;
    for (StateId s = 0; s < mdp.n_states; ++s)
        if (mdp.terminal[s]) terminal_mass += d.row(s).sum();
    std::printf("%-10s rho=%.10g  (1-gamma)*rho=%.10g  visitation_sum=%.12f  terminal_mass=%.6f\n", label, rho,
                (1.0 - mdp.gamma) * rho, d.sum(), terminal_mass);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SimuDICE offline policy optimisation benchmark"};
    app.footer(std::string(kConfigKeys));
    app.require_subcommand(1);

    CommonOptions collect_opts, compare_opts, ablate_opts;
    auto* collect = app.add_subcommand("collect", "Train partial policies and write offline datasets");
    add_common(collect, collect_opts);

    auto* compare = app.add_subcommand("compare", "Compare SimuDICE, offline Dyna-Q and offline Q-learning");
    add_common(compare, compare_opts);

    auto* ablate = app.add_subcommand("ablate", "Planning-step, formula and iteration ablations (Taxi by default)");
    add_common(ablate, ablate_opts);
    std::string study = "planning_steps";
    ablate->add_option("--study", study, "planning_steps | formulas | iterations")
        ->check(CLI::IsMember({"planning_steps", "formulas", "iterations"}))
        ->capture_default_str();

    auto* eval = app.add_subcommand("eval", "Evaluate a saved policy, or train one from a dataset and evaluate it");
    std::string eval_policy, eval_dataset, eval_algorithm = "SimuDICE-F1", eval_save, eval_env;
    int eval_episodes = 500, eval_ps = 10, eval_iterations = 1;
    std::uint64_t eval_seed = 0;
    bool eval_quiet = false;
    auto* policy_opt = eval->add_option("--policy", eval_policy, "Policy JSON file")->check(CLI::ExistingFile);
    auto* dataset_opt = eval->add_option("--dataset", eval_dataset, "Dataset file to train from")->check(CLI::ExistingFile);
    policy_opt->excludes(dataset_opt);
    eval->add_option("--algorithm", eval_algorithm, "SimuDICE-F1|F2|F3, DynaQ or OfflineQ")->capture_default_str();
    eval->add_option("--planning-steps", eval_ps, "Planning steps per real experience")->capture_default_str();
    eval->add_option("--iterations", eval_iterations, "Outer-loop iterations")->capture_default_str();
    eval->add_option("--save-policy", eval_save, "Write the trained greedy policy here");
    eval->add_option("--episodes", eval_episodes, "Evaluation episodes")->capture_default_str();
    eval->add_option("--master-seed", eval_seed, "Seed for training and evaluation")->capture_default_str();
    eval->add_option("--env", eval_env, "Expected environment (checked against the file)");
    eval->add_flag("--quiet", eval_quiet, "Only print the value");

    auto* oracle = app.add_subcommand("oracle", "Print exact policy values and visitation statistics");
    std::string oracle_env = "FrozenLake", oracle_policy;
    double oracle_gamma = 0.99;
    oracle->add_option("--env", oracle_env, "Environment")->capture_default_str();
    oracle->add_option("--gamma", oracle_gamma, "Discount")->capture_default_str();
    oracle->add_option("--policy", oracle_policy, "Optional policy JSON file")->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (collect->parsed()) {
            if (collect_opts.quiet) spdlog::set_level(spdlog::level::warn);
            const auto config = resolve_config(collect_opts);
            const auto summary = cmd_collect(config, fs::path(collect_opts.out_dir) / "datasets");
            if (!collect_opts.quiet) {
                for (const auto& [env, partial] : summary.partial_policies)
                    std::printf("%-13s partial policy per-step %.4f (target %.4f, %ld steps%s)\n",
                                std::string(to_string(env)).c_str(), partial.achieved, config.partial_targets.at(env),
                                partial.training_steps, partial.within_tolerance ? "" : ", off target");
                std::printf("%zu dataset files -> %s\n", summary.files.size(),
                            (fs::path(collect_opts.out_dir) / "datasets").string().c_str());
            }
        } else if (compare->parsed()) {
            if (compare_opts.quiet) spdlog::set_level(spdlog::level::warn);
            const auto config = resolve_config(compare_opts);
            emit_results(compare_opts, cmd_compare(config, fs::path(compare_opts.out_dir) / "datasets"));
        } else if (ablate->parsed()) {
            if (ablate_opts.quiet) spdlog::set_level(spdlog::level::warn);
            const auto config = resolve_config(ablate_opts, std::vector{EnvName::Taxi});
            emit_results(ablate_opts, cmd_ablate(config, *parse_ablation(study), fs::path(ablate_opts.out_dir) / "datasets"));
        } else if (eval->parsed()) {
            if (eval_policy.empty() && eval_dataset.empty())
                throw CLI::ValidationError("eval", "one of --policy or --dataset is required");
            std::optional<EnvName> expected;
            if (!eval_env.empty()) expected = require_env(eval_env);
            EnvName env;
            Policy pi;
            if (!eval_policy.empty()) {
                std::tie(env, pi) = load_policy(eval_policy);
                if (expected && *expected != env) throw std::invalid_argument("policy file is for " + std::string(to_string(env)));
            } else {
                const auto d = load_dataset(eval_dataset, expected);
                env = d.env_spec.name;
                const auto algo = parse_algorithm(eval_algorithm);
                Hyperparams h;
                h.planning_steps = eval_ps;
                h.iterations = eval_iterations;
                h.formula = algo.formula;
                Rng rng(split_seed(eval_seed, fnv1a("eval-train"), 0));
                switch (algo.kind) {
                    case AlgorithmKind::OfflineQ: pi = greedy_policy(offline_q_learning(d, h, rng)); break;
                    case AlgorithmKind::DynaQ: pi = run_offline_dyna_q(d, h, rng).policy; break;
                    case AlgorithmKind::SimuDICE: pi = run_simudice(d, h, rng).policy; break;
                }
                if (!eval_save.empty()) save_policy(pi, env, eval_save);
            }
            Rng rng(split_seed(eval_seed, fnv1a("eval-rollout"), 0));
            const double value = evaluate_policy(make_spec(env), pi, eval_episodes, 100, rng);
            if (eval_quiet) std::printf("%.10g\n", value);
            else std::printf("%s average per-step reward over %d episodes: %.6f\n", std::string(to_string(env)).c_str(),
                             eval_episodes, value);
        } else if (oracle->parsed()) {
            const EnvName env = require_env(oracle_env);
            const auto mdp = to_tabular_mdp(make_spec(env), oracle_gamma);
            std::printf("%s: %d states, %d actions, gamma=%g\n", std::string(to_string(env)).c_str(), mdp.n_states,
                        mdp.n_actions, mdp.gamma);
            print_oracle_line("uniform", mdp, Policy::uniform(mdp.n_states, mdp.n_actions));
            print_oracle_line("optimal", mdp, greedy_policy(value_iteration(mdp)));
            if (!oracle_policy.empty()) {
                auto [policy_env, pi] = load_policy(oracle_policy);
                if (policy_env != env) throw std::invalid_argument("policy file is for " + std::string(to_string(policy_env)));
                print_oracle_line("policy", mdp, pi);
            }
        }
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
