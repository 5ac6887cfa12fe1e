#pragma once

// Small hand-built MDPs and exact-count datasets shared by the test suites.

#include "simudice/simudice.hpp"

#include <stdexcept>
#include <vector>

namespace simudice::testing {

/// Two states, two actions. Action 0 mostly stays, action 1 always switches.
inline TabularMdp two_state_chain(double gamma = 0.9) {
    TabularMdp m(2, 2, gamma);
    m.transition[m.pair_index(0, 0)] = {{0, 0.8}, {1, 0.2}};
    m.transition[m.pair_index(0, 1)] = {{1, 1.0}};
    m.transition[m.pair_index(1, 0)] = {{1, 0.8}, {0, 0.2}};
    m.transition[m.pair_index(1, 1)] = {{0, 1.0}};
    m.reward << 0.0, 1.0, 2.0, -0.5;
    m.mu0 << 0.5, 0.5;
    return m;
}

/// Three-state chain 0 -> 1 -> 2 with a stochastic "advance" action and a
/// deterministic "reset to 0" action.
inline TabularMdp three_state_chain(double gamma = 0.9) {
    TabularMdp m(3, 2, gamma);
    m.transition[m.pair_index(0, 0)] = {{1, 0.7}, {0, 0.3}};
    m.transition[m.pair_index(1, 0)] = {{2, 0.7}, {1, 0.3}};
    m.transition[m.pair_index(2, 0)] = {{2, 1.0}};
    for (StateId s = 0; s < 3; ++s) m.transition[m.pair_index(s, 1)] = {{0, 1.0}};
    m.reward << 0.0, 0.1, 0.0, 0.2, 1.0, 0.3;
    m.mu0 << 0.6, 0.4, 0.0;
    return m;
}

// --- deterministic fixtures for DualDICE ------------------------------------

/// Ring of three states: action 0 stays, action 1 advances.
inline TabularMdp ring3(double gamma = 0.9) {
    TabularMdp m(3, 2, gamma);
    for (StateId s = 0; s < 3; ++s) {
        m.transition[m.pair_index(s, 0)] = {{s, 1.0}};
        m.transition[m.pair_index(s, 1)] = {{(s + 1) % 3, 1.0}};
    }
    m.reward << 0.0, 1.0, 0.5, -1.0, 2.0, 0.0;
    m.mu0 << 1.0, 0.0, 0.0;
    return m;
}

/// Four-state line: action 0 left, action 1 right, walls at both ends.
inline TabularMdp line4(double gamma = 0.8) {
    TabularMdp m(4, 2, gamma);
    for (StateId s = 0; s < 4; ++s) {
        m.transition[m.pair_index(s, 0)] = {{std::max(s - 1, 0), 1.0}};
        m.transition[m.pair_index(s, 1)] = {{std::min(s + 1, 3), 1.0}};
    }
    m.reward << 0.0, -1.0, 0.0, -1.0, 0.0, -1.0, 5.0, 5.0;
    m.mu0 << 0.5, 0.5, 0.0, 0.0;
    return m;
}

/// Five states with a terminal state 4 reachable from 3.
inline TabularMdp five_with_terminal(double gamma = 0.95) {
    TabularMdp m(5, 2, gamma);
    const int next0[5] = {1, 2, 0, 4, 4};
    const int next1[5] = {2, 3, 3, 1, 4};
    for (StateId s = 0; s < 5; ++s) {
        m.transition[m.pair_index(s, 0)] = {{next0[s], 1.0}};
        m.transition[m.pair_index(s, 1)] = {{next1[s], 1.0}};
    }
    m.reward << 1.0, 0.0, 0.0, 2.0, -1.0, 0.5, 3.0, -2.0, 0.0, 0.0;
    m.terminal[4] = true;
    m.mu0 << 0.25, 0.25, 0.5, 0.0, 0.0;
    return m;
}

/**
 * Dataset whose empirical pair distribution is exactly multiplicity / N and
 * whose empirical start distribution is exactly start_counts / N.
 * Transitions must be deterministic. Terminal states are logged as
 * zero-reward self-loops with done = false, which is how the exact oracle
 * sees them.
 */
inline Dataset exact_dataset(const TabularMdp& mdp, const Eigen::MatrixXi& multiplicity,
                             const std::vector<int>& start_counts) {
    Dataset d;
    d.env_spec = {EnvName::Custom, mdp.n_states, mdp.n_actions, 1 << 30};
    std::vector<StateId> starts;
    for (StateId s = 0; s < mdp.n_states; ++s)
        for (int k = 0; k < start_counts[static_cast<std::size_t>(s)]; ++k) starts.push_back(s);
    const Eigen::MatrixXd reward = effective_reward(mdp);
    for (StateId s = 0; s < mdp.n_states; ++s) {
        for (ActionId a = 0; a < mdp.n_actions; ++a) {
            const auto& succ = mdp.successors(s, a);
            if (succ.size() != 1) throw std::invalid_argument("exact_dataset: deterministic transitions only");
            const StateId next = mdp.terminal[s] ? s : succ.front().next;
            for (int k = 0; k < multiplicity(s, a); ++k)
                d.records.push_back({0, s, a, reward(s, a), next, false, false});
        }
    }
    if (starts.size() != d.records.size()) throw std::invalid_argument("exact_dataset: start counts must sum to N");
    for (std::size_t i = 0; i < d.records.size(); ++i) d.records[i].episode_start_state = starts[i];
    return d;
}

/// Uniform-coverage exact dataset: `per_pair` records for every pair, starts
/// distributed proportionally to mu0 (mu0 * N must be integral).
inline Dataset uniform_exact_dataset(const TabularMdp& mdp, int per_pair) {
    const Eigen::MatrixXi mult = Eigen::MatrixXi::Constant(mdp.n_states, mdp.n_actions, per_pair);
    const int n = per_pair * mdp.n_states * mdp.n_actions;
    std::vector<int> starts(static_cast<std::size_t>(mdp.n_states));
    int assigned = 0;
    for (StateId s = 0; s < mdp.n_states; ++s) {
        const double exact = mdp.mu0(s) * n;
        starts[static_cast<std::size_t>(s)] = static_cast<int>(std::lround(exact));
        if (std::abs(exact - starts[static_cast<std::size_t>(s)]) > 1e-9)
            throw std::invalid_argument("uniform_exact_dataset: mu0 * N not integral");
        assigned += starts[static_cast<std::size_t>(s)];
    }
    if (assigned != n) throw std::invalid_argument("uniform_exact_dataset: start counts do not sum to N");
    return exact_dataset(mdp, mult, starts);
}

/// A fixed stochastic policy with all-positive rows.
inline Policy mixed_policy(int n_states, int n_actions, double bias = 0.3) {
    Eigen::MatrixXd p(n_states, n_actions);
    for (StateId s = 0; s < n_states; ++s) {
        double total = 0.0;
        for (ActionId a = 0; a < n_actions; ++a) total += p(s, a) = 1.0 + bias * ((s + 2 * a) % 3);
        p.row(s) /= total;
    }
    return Policy(std::move(p));
}

}  // namespace simudice::testing
