#pragma once

#include "simudice/envs.hpp"
#include "simudice/mdp.hpp"
#include "simudice/rng.hpp"

#include <stdexcept>

namespace simudice {

/// One tabular Q-learning step. Termination zeroes the bootstrap; truncation does not.
inline void q_update(QTable& q, StateId s, ActionId a, double reward, StateId next, bool done, double alpha,
                     double gamma) {
    const double bootstrap = done ? 0.0 : gamma * q.max_value(next);
    q(s, a) += alpha * (reward + bootstrap - q(s, a));
}

inline ActionId sample_action(const Policy& pi, StateId s, Rng& rng) {
    const auto row = pi.probs.row(s);
    // Deterministic rows still draw once so streams do not depend on policy shape.
    double u = rng.uniform();
    ActionId last = 0;
    for (ActionId a = 0; a < pi.n_actions(); ++a) {
        const double p = row(a);
        if (p <= 0.0) continue;
        last = a;
        if (u < p) return a;
        u -= p;
    }
    return last;
}

/// Total reward / total steps over `n_episodes` rollouts in the real environment.
inline double evaluate_policy(const EnvSpec& spec, const Policy& pi, int n_episodes, int max_steps, Rng& rng) {
    if (n_episodes < 1) throw std::invalid_argument("evaluate_policy: n_episodes must be >= 1");
    EnvSpec capped = spec;
    capped.max_episode_steps = max_steps;
    Environment env(capped);
    double total_reward = 0.0;
    long total_steps = 0;
    for (int ep = 0; ep < n_episodes; ++ep) {
        StateId s = env.reset(rng);
        for (;;) {
            const auto result = env.step(sample_action(pi, s, rng));
            total_reward += result.reward;
            ++total_steps;
            s = result.next_state;
            if (result.done || result.truncated) break;
        }
    }
    return total_reward / static_cast<double>(total_steps);
}

}  // namespace simudice
