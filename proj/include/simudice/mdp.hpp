#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace simudice {

using StateId = int;
using ActionId = int;

/// One possible successor of a state-action pair.
struct Outcome {
    StateId next;
    double prob;
};

/**
 * Fully specified finite MDP.
 *
 * Transitions are stored sparsely: `transition[pair_index(s, a)]` lists the
 * successors of (s, a). Terminal states are treated as absorbing with zero
 * reward by every exact oracle, whatever their stored rows say.
 */
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<std::vector<Outcome>> transition;
    Eigen::MatrixXd reward;       // n_states x n_actions
    std::vector<bool> terminal;   // per state
    Eigen::VectorXd mu0;          // per state
    double gamma = 0.99;

    TabularMdp() = default;
    TabularMdp(int states, int actions, double discount)
        : n_states(states),
          n_actions(actions),
          transition(static_cast<std::size_t>(states) * actions),
          reward(Eigen::MatrixXd::Zero(states, actions)),
          terminal(static_cast<std::size_t>(states), false),
          mu0(Eigen::VectorXd::Zero(states)),
          gamma(discount) {}

    [[nodiscard]] std::size_t pair_index(StateId s, ActionId a) const {
        return static_cast<std::size_t>(s) * n_actions + a;
    }
    [[nodiscard]] const std::vector<Outcome>& successors(StateId s, ActionId a) const {
        return transition[pair_index(s, a)];
    }
};

/// Throws std::invalid_argument describing the first violated invariant.
inline void validate(const TabularMdp& mdp) {
    if (mdp.n_states <= 0 || mdp.n_actions <= 0) throw std::invalid_argument("mdp: empty state or action space");
    if (!(mdp.gamma >= 0.0 && mdp.gamma < 1.0)) throw std::invalid_argument("mdp: gamma must lie in [0, 1)");
    const auto pairs = static_cast<std::size_t>(mdp.n_states) * mdp.n_actions;
    if (mdp.transition.size() != pairs || mdp.reward.rows() != mdp.n_states || mdp.reward.cols() != mdp.n_actions ||
        mdp.terminal.size() != static_cast<std::size_t>(mdp.n_states) || mdp.mu0.size() != mdp.n_states) {
        throw std::invalid_argument("mdp: table shapes do not match state/action counts");
    }
    for (StateId s = 0; s < mdp.n_states; ++s) {
        if (mdp.terminal[s]) continue;
        for (ActionId a = 0; a < mdp.n_actions; ++a) {
            double total = 0.0;
            for (const auto& o : mdp.successors(s, a)) {
                if (o.next < 0 || o.next >= mdp.n_states || o.prob < 0.0)
                    throw std::invalid_argument("mdp: bad successor for pair (" + std::to_string(s) + "," + std::to_string(a) + ")");
                total += o.prob;
            }
            if (std::abs(total - 1.0) > 1e-12)
                throw std::invalid_argument("mdp: transition row (" + std::to_string(s) + "," + std::to_string(a) + ") does not sum to 1");
        }
    }
    if ((mdp.mu0.array() < 0.0).any() || std::abs(mdp.mu0.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("mdp: mu0 is not a probability vector");
    if (!mdp.reward.allFinite()) throw std::invalid_argument("mdp: non-finite reward");
}

/// Action values Q(s, a).
struct QTable {
    Eigen::MatrixXd values;

    QTable() = default;
    QTable(int n_states, int n_actions) : values(Eigen::MatrixXd::Zero(n_states, n_actions)) {}
    explicit QTable(Eigen::MatrixXd v) : values(std::move(v)) {}

    [[nodiscard]] int n_states() const { return static_cast<int>(values.rows()); }
    [[nodiscard]] int n_actions() const { return static_cast<int>(values.cols()); }
    double& operator()(StateId s, ActionId a) { return values(s, a); }
    [[nodiscard]] double operator()(StateId s, ActionId a) const { return values(s, a); }

    [[nodiscard]] double max_value(StateId s) const { return values.row(s).maxCoeff(); }

    /// Lowest-index argmax.
    [[nodiscard]] ActionId argmax(StateId s) const {
        ActionId best = 0;
        for (ActionId a = 1; a < n_actions(); ++a)
            if (values(s, a) > values(s, best)) best = a;
        return best;
    }

    friend bool operator==(const QTable& lhs, const QTable& rhs) {
        return lhs.values.rows() == rhs.values.rows() && lhs.values.cols() == rhs.values.cols() &&
               lhs.values == rhs.values;
    }
};

/// Stochastic policy pi(a | s) stored as an n_states x n_actions table.
struct Policy {
    Eigen::MatrixXd probs;

    Policy() = default;
    explicit Policy(Eigen::MatrixXd p) : probs(std::move(p)) {}

    [[nodiscard]] int n_states() const { return static_cast<int>(probs.rows()); }
    [[nodiscard]] int n_actions() const { return static_cast<int>(probs.cols()); }
    [[nodiscard]] double operator()(StateId s, ActionId a) const { return probs(s, a); }

    static Policy uniform(int n_states, int n_actions) {
        return Policy(Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / n_actions));
    }

    [[nodiscard]] bool is_valid(double tol = 1e-12) const {
        if ((probs.array() < 0.0).any()) return false;
        for (Eigen::Index s = 0; s < probs.rows(); ++s)
            if (std::abs(probs.row(s).sum() - 1.0) > tol) return false;
        return true;
    }
};

inline Policy greedy_policy(const QTable& q) {
    if (!q.values.allFinite()) throw std::invalid_argument("greedy_policy: Q contains non-finite entries");
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(q.n_states(), q.n_actions());
    for (StateId s = 0; s < q.n_states(); ++s) p(s, q.argmax(s)) = 1.0;
    return Policy(std::move(p));
}

inline Policy epsilon_greedy_policy(const QTable& q, double epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon_greedy_policy: epsilon outside [0, 1]");
    if (!q.values.allFinite()) throw std::invalid_argument("epsilon_greedy_policy: Q contains non-finite entries");
    const double explore = epsilon / q.n_actions();
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(q.n_states(), q.n_actions(), explore);
    for (StateId s = 0; s < q.n_states(); ++s) p(s, q.argmax(s)) = 1.0 - epsilon + explore;
    return Policy(std::move(p));
}

/// Reward table with terminal rows zeroed, as seen by the exact oracles.
inline Eigen::MatrixXd effective_reward(const TabularMdp& mdp) {
    Eigen::MatrixXd r = mdp.reward;
    for (StateId s = 0; s < mdp.n_states; ++s)
        if (mdp.terminal[s]) r.row(s).setZero();
    return r;
}

namespace detail {

/// State-to-state kernel under pi, terminals absorbing.
inline Eigen::MatrixXd policy_kernel(const TabularMdp& mdp, const Policy& pi) {
    Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states);
    for (StateId s = 0; s < mdp.n_states; ++s) {
        if (mdp.terminal[s]) {
            kernel(s, s) = 1.0;
            continue;
        }
        for (ActionId a = 0; a < mdp.n_actions; ++a) {
            const double pa = pi(s, a);
            if (pa == 0.0) continue;
            for (const auto& o : mdp.successors(s, a)) kernel(s, o.next) += pa * o.prob;
        }
    }
    return kernel;
}

inline void check_policy_shape(const TabularMdp& mdp, const Policy& pi) {
    if (pi.n_states() != mdp.n_states || pi.n_actions() != mdp.n_actions)
        throw std::invalid_argument("policy shape does not match mdp");
    if (!pi.is_valid(1e-9)) throw std::invalid_argument("policy rows are not probability distributions");
}

}  // namespace detail

/// State values V^pi from a dense LU solve of (I - gamma P^pi) V = r^pi.
inline Eigen::VectorXd state_values_exact(const TabularMdp& mdp, const Policy& pi) {
    validate(mdp);
    detail::check_policy_shape(mdp, pi);
    const Eigen::MatrixXd r = effective_reward(mdp);
    const Eigen::VectorXd r_pi = (pi.probs.array() * r.array()).rowwise().sum();
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * detail::policy_kernel(mdp, pi);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    if (!(std::abs(lu.determinant()) > 0.0)) throw std::runtime_error("policy evaluation: singular system");
    return lu.solve(r_pi);
}

/**
 * Exact policy value.
 *
 * With `per_unit == false` returns the unnormalised discounted return
 * rho(pi) = mu0' V^pi. With `per_unit == true` returns (1 - gamma) rho(pi),
 * which is the expected reward under the normalised discounted visitation
 * distribution.
 */
inline double policy_value_exact(const TabularMdp& mdp, const Policy& pi, bool per_unit = false) {
    const double rho = mdp.mu0.dot(state_values_exact(mdp, pi));
    return per_unit ? (1.0 - mdp.gamma) * rho : rho;
}

/// d^pi(s, a) = (1 - gamma) sum_t gamma^t Pr[s_t = s, a_t = a]; sums to one.
inline Eigen::MatrixXd visitation_distribution_exact(const TabularMdp& mdp, const Policy& pi) {
    validate(mdp);
    detail::check_policy_shape(mdp, pi);
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * detail::policy_kernel(mdp, pi);
    const Eigen::VectorXd state_visits = system.transpose().partialPivLu().solve((1.0 - mdp.gamma) * mdp.mu0);
    return state_visits.asDiagonal() * pi.probs;
}

/// Optimal Q by value iteration; stops when the max-norm update drops below tol.
inline QTable value_iteration(const TabularMdp& mdp, double tol = 1e-10, int max_iterations = 100000) {
    validate(mdp);
    const Eigen::MatrixXd r = effective_reward(mdp);
    QTable q(mdp.n_states, mdp.n_actions);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.n_states);
    for (int it = 0; it < max_iterations; ++it) {
        for (StateId s = 0; s < mdp.n_states; ++s) {
            for (ActionId a = 0; a < mdp.n_actions; ++a) {
                if (mdp.terminal[s]) {
                    q(s, a) = 0.0;
                    continue;
                }
                double next = 0.0;
                for (const auto& o : mdp.successors(s, a)) next += o.prob * v(o.next);
                q(s, a) = r(s, a) + mdp.gamma * next;
            }
        }
        const Eigen::VectorXd updated = q.values.rowwise().maxCoeff();
        const double delta = (updated - v).cwiseAbs().maxCoeff();
        v = updated;
        if (delta < tol) break;
    }
    return q;
}

}  // namespace simudice
