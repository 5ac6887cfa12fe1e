#pragma once

#include "simudice/envs.hpp"
#include "simudice/mdp.hpp"
#include "simudice/qlearning.hpp"
#include "simudice/rng.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace simudice {

struct ExperienceRecord {
    StateId episode_start_state = 0;
    StateId state = 0;
    ActionId action = 0;
    double reward = 0.0;
    StateId next_state = 0;
    bool done = false;
    bool truncated = false;

    friend bool operator==(const ExperienceRecord&, const ExperienceRecord&) = default;
};

/// Offline experience log. Records are grouped into contiguous episodes.
struct Dataset {
    EnvSpec env_spec;
    std::vector<ExperienceRecord> records;
    double behavior_epsilon = 0.0;
    std::uint64_t collection_seed = 0;

    [[nodiscard]] std::size_t size() const { return records.size(); }
    [[nodiscard]] bool empty() const { return records.empty(); }
    [[nodiscard]] int n_states() const { return env_spec.n_states; }
    [[nodiscard]] int n_actions() const { return env_spec.n_actions; }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Checks ids, flag consistency and episode lengths.
inline void validate(const Dataset& d) {
    if (d.empty()) throw DatasetError("dataset: record list is empty");
    const int S = d.n_states(), A = d.n_actions();
    int episode_length = 0;
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        const auto& r = d.records[i];
        if (r.state < 0 || r.state >= S || r.next_state < 0 || r.next_state >= S || r.episode_start_state < 0 ||
            r.episode_start_state >= S || r.action < 0 || r.action >= A)
            throw DatasetError("dataset: record " + std::to_string(i) + " has out-of-range ids");
        if (r.done && r.truncated) throw DatasetError("dataset: record " + std::to_string(i) + " is both done and truncated");
        if (!std::isfinite(r.reward)) throw DatasetError("dataset: record " + std::to_string(i) + " has non-finite reward");
        ++episode_length;
        if (episode_length > d.env_spec.max_episode_steps)
            throw DatasetError("dataset: episode longer than max_episode_steps at record " + std::to_string(i));
        if (r.done || r.truncated) episode_length = 0;
    }
}

/// Empirical distribution over (s, a) of the recorded pairs, n_states x n_actions.
inline Eigen::MatrixXd empirical_pair_distribution(const Dataset& d) {
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(d.n_states(), d.n_actions());
    for (const auto& r : d.records) dist(r.state, r.action) += 1.0;
    return dist / static_cast<double>(d.size());
}

/// Runs episodes under `pi` until exactly `n_timesteps` transitions are logged.
inline Dataset collect_dataset(const EnvSpec& spec, const Policy& pi, int n_timesteps, Rng& rng) {
    if (n_timesteps < 1) throw std::invalid_argument("collect_dataset: n_timesteps must be >= 1");
    Environment env(spec);
    Dataset d;
    d.env_spec = spec;
    d.records.reserve(static_cast<std::size_t>(n_timesteps));
    while (static_cast<int>(d.records.size()) < n_timesteps) {
        const StateId start = env.reset(rng);
        StateId s = start;
        while (static_cast<int>(d.records.size()) < n_timesteps) {
            const ActionId a = sample_action(pi, s, rng);
            const auto step = env.step(a);
            d.records.push_back({start, s, a, step.reward, step.next_state, step.done, step.truncated});
            s = step.next_state;
            if (step.done || step.truncated) break;
        }
    }
    return d;
}

struct PartialTrainingOptions {
    double tolerance = 0.05;
    long eval_every = 1000;
    long step_budget = 2'000'000;
    int eval_episodes = 500;
    double alpha = 0.1;
    double gamma = 0.99;
    double exploration = 0.1;
};

struct PartialPolicy {
    QTable q;
    double achieved = 0.0;       // greedy per-step reward at the returned checkpoint
    long training_steps = 0;     // steps taken when that checkpoint was recorded
    bool within_tolerance = false;
};

/**
 * Online epsilon-greedy Q-learning with greedy-policy checkpoints every
 * `eval_every` steps. Stops at the first checkpoint whose per-step reward is
 * within `tolerance` of the target; otherwise returns the closest checkpoint
 * after `step_budget` steps and logs a warning.
 */
inline PartialPolicy train_partial_policy(const EnvSpec& spec, double target_per_step_value, Rng& rng,
                                          const PartialTrainingOptions& options = {}) {
    Environment env(spec);
    QTable q(spec.n_states, spec.n_actions);
    PartialPolicy best{q, std::numeric_limits<double>::quiet_NaN(), 0, false};
    double best_gap = std::numeric_limits<double>::infinity();
    Rng eval_rng(rng());

    StateId s = env.reset(rng);
    for (long step = 1; step <= options.step_budget; ++step) {
        const ActionId a = rng.bernoulli(options.exploration)
                               ? static_cast<ActionId>(rng.uniform_int(static_cast<std::size_t>(spec.n_actions)))
                               : q.argmax(s);
        const auto result = env.step(a);
        q_update(q, s, a, result.reward, result.next_state, result.done, options.alpha, options.gamma);
        s = (result.done || result.truncated) ? env.reset(rng) : result.next_state;

        if (step % options.eval_every != 0) continue;
        const double value = evaluate_policy(spec, greedy_policy(q), options.eval_episodes, spec.max_episode_steps, eval_rng);
        const double gap = std::abs(value - target_per_step_value);
        if (gap < best_gap) {
            best_gap = gap;
            best = {q, value, step, gap <= options.tolerance};
        }
        if (gap <= options.tolerance) return best;
    }
    spdlog::warn("train_partial_policy: {} target {:.4f} not reached within {} steps; closest checkpoint {:.4f}",
                 to_string(spec.name), target_per_step_value, options.step_budget, best.achieved);
    return best;
}

// --- persistence -----------------------------------------------------------

inline void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    if (d.env_spec.name == EnvName::Custom) throw DatasetError("save_dataset: custom environments have no file form");
    validate(d);
    std::ofstream out(path);
    if (!out) throw DatasetError("save_dataset: cannot open " + path.string());
    nlohmann::json header{{"env", to_string(d.env_spec.name)},
                          {"epsilon", d.behavior_epsilon},
                          {"seed", d.collection_seed},
                          {"n_records", d.records.size()},
                          {"max_episode_steps", d.env_spec.max_episode_steps}};
    out << header.dump() << '\n';
    for (const auto& r : d.records) {
        nlohmann::json row{{"episode_start_state", r.episode_start_state},
                           {"state", r.state},
                           {"action", r.action},
                           {"reward", r.reward},
                           {"next_state", r.next_state},
                           {"done", r.done},
                           {"truncated", r.truncated}};
        out << row.dump() << '\n';
    }
    if (!out) throw DatasetError("save_dataset: write failed for " + path.string());
}

/// Loads and validates a dataset file. When `expected` is given the header must match it.
inline Dataset load_dataset(const std::filesystem::path& path, const std::optional<EnvName>& expected = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw DatasetError("load_dataset: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DatasetError("load_dataset: missing header in " + path.string());
    Dataset d;
    std::size_t n_records = 0;
    try {
        const auto header = nlohmann::json::parse(line);
        const auto env_name = header.at("env").get<std::string>();
        const auto name = parse_env_name(env_name);
        if (!name) throw DatasetError("load_dataset: unknown environment '" + env_name + "'");
        if (expected && *expected != *name)
            throw DatasetError("load_dataset: environment mismatch, expected " + std::string(to_string(*expected)) +
                               " got " + env_name);
        d.env_spec = make_spec(*name, header.value("max_episode_steps", 100));
        d.behavior_epsilon = header.at("epsilon").get<double>();
        d.collection_seed = header.at("seed").get<std::uint64_t>();
        n_records = header.at("n_records").get<std::size_t>();
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto row = nlohmann::json::parse(line);
            d.records.push_back({row.at("episode_start_state").get<StateId>(), row.at("state").get<StateId>(),
                                 row.at("action").get<ActionId>(), row.at("reward").get<double>(),
                                 row.at("next_state").get<StateId>(), row.at("done").get<bool>(),
                                 row.at("truncated").get<bool>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError("load_dataset: malformed file " + path.string() + ": " + e.what());
    }
    if (d.records.size() != n_records)
        throw DatasetError("load_dataset: header announces " + std::to_string(n_records) + " records, file has " +
                           std::to_string(d.records.size()));
    validate(d);
    return d;
}

}  // namespace simudice
