#pragma once

#include "simudice/dataset.hpp"
#include "simudice/mdp.hpp"

#include <Eigen/Sparse>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace simudice {

/// nu : S x A -> R, the DualDICE dual variable.
struct NuFunction {
    Eigen::MatrixXd values;
};

/// Correction weights w = d^pi / d^D. `support` is flat over s * n_actions + a.
struct DiceWeights {
    Eigen::MatrixXd w;
    std::vector<bool> support;

    [[nodiscard]] bool supported(StateId s, ActionId a) const {
        return support[static_cast<std::size_t>(s) * w.cols() + a];
    }
};

class DiceSolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Quadratic form of the empirical DualDICE objective
 *
 *   J(nu) = 1/2 nu' H nu - b' nu,
 *
 * with H = (1/N) sum_i a_i a_i' built from per-record zero-reward Bellman
 * residual rows a_i = e(s_i, a_i) - gamma [not done_i] sum_a' pi(a'|s'_i) e(s'_i, a'),
 * and b = (1 - gamma) mu0_hat(s) pi(a|s) using the empirical start-state
 * distribution of the records.
 */
struct DualDiceSystem {
    Eigen::SparseMatrix<double> hessian;
    Eigen::VectorXd linear;
};

namespace detail {

inline void check_dice_inputs(const Dataset& d, const Policy& pi, double gamma) {
    if (d.empty()) throw std::invalid_argument("dualdice: empty dataset");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("dualdice: gamma must lie in [0, 1)");
    if (pi.n_states() != d.n_states() || pi.n_actions() != d.n_actions())
        throw std::invalid_argument("dualdice: policy shape does not match dataset");
}

/// Sparse residual row of one record as (flat index, coefficient) pairs, duplicates merged.
inline std::vector<std::pair<int, double>> residual_row(const ExperienceRecord& r, const Policy& pi, double gamma) {
    const int A = pi.n_actions();
    std::vector<std::pair<int, double>> row{{r.state * A + r.action, 1.0}};
    if (r.done) return row;
    for (ActionId a = 0; a < A; ++a) {
        const double p = pi(r.next_state, a);
        if (p == 0.0) continue;
        const int idx = r.next_state * A + a;
        if (idx == row.front().first) row.front().second -= gamma * p;
        else row.emplace_back(idx, -gamma * p);
    }
    return row;
}

inline double continuation(const NuFunction& nu, const Policy& pi, StateId next) {
    return pi.probs.row(next).dot(nu.values.row(next));
}

}  // namespace detail

inline DualDiceSystem assemble_dualdice_system(const Dataset& d, const Policy& pi, double gamma) {
    detail::check_dice_inputs(d, pi, gamma);
    const int A = d.n_actions();
    const int n = d.n_states() * A;
    const double inv_n = 1.0 / static_cast<double>(d.size());

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(d.size() * 4);
    Eigen::VectorXd start = Eigen::VectorXd::Zero(d.n_states());
    for (const auto& r : d.records) {
        const auto row = detail::residual_row(r, pi, gamma);
        for (const auto& [i, ci] : row)
            for (const auto& [j, cj] : row) triplets.emplace_back(i, j, inv_n * ci * cj);
        start(r.episode_start_state) += inv_n;
    }
    DualDiceSystem sys;
    sys.hessian.resize(n, n);
    sys.hessian.setFromTriplets(triplets.begin(), triplets.end());
    sys.linear = Eigen::VectorXd::Zero(n);
    for (StateId s = 0; s < d.n_states(); ++s)
        for (ActionId a = 0; a < A; ++a) sys.linear(s * A + a) = (1.0 - gamma) * start(s) * pi(s, a);
    return sys;
}

/// Empirical J(nu) evaluated directly from the records.
inline double dualdice_objective(const NuFunction& nu, const Dataset& d, const Policy& pi, double gamma) {
    detail::check_dice_inputs(d, pi, gamma);
    double squares = 0.0, start_term = 0.0;
    for (const auto& r : d.records) {
        const double next = r.done ? 0.0 : detail::continuation(nu, pi, r.next_state);
        const double residual = nu.values(r.state, r.action) - gamma * next;
        squares += residual * residual;
        start_term += detail::continuation(nu, pi, r.episode_start_state);
    }
    const double n = static_cast<double>(d.size());
    return 0.5 * squares / n - (1.0 - gamma) * start_term / n;
}

/**
 * Minimises the empirical DualDICE objective in closed form.
 *
 * In the tabular case J is a convex quadratic, so the minimiser solves
 * (H + ridge I) nu = b, followed by `refinement_steps` rounds of iterative
 * refinement against the unregularised system. Pairs that appear in no term
 * are pinned to zero by the ridge.
 */
inline NuFunction solve_dualdice(const Dataset& d, const Policy& pi, double gamma, double ridge = 1e-8,
                                 int refinement_steps = 2) {
    if (!(ridge > 0.0)) throw std::invalid_argument("dualdice: ridge must be positive");
    auto sys = assemble_dualdice_system(d, pi, gamma);
    const auto n = sys.hessian.rows();
    Eigen::SparseMatrix<double> identity(n, n);
    identity.setIdentity();
    Eigen::SparseMatrix<double> regularised = sys.hessian + ridge * identity;

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(regularised);
    if (solver.info() != Eigen::Success)
        throw DiceSolveError("dualdice: factorisation failed (ridge=" + std::to_string(ridge) + ", n=" + std::to_string(n) + ")");
    Eigen::VectorXd nu = solver.solve(sys.linear);
    // Refinement filtered through H (H + ridge I)^-1 so that it acts on the range of H only:
    // strips the O(ridge / lambda_min) bias there and leaves null directions where the ridge put them.
    for (int step = 0; step < refinement_steps; ++step) {
        const Eigen::VectorXd residual = sys.linear - sys.hessian * nu;
        nu += solver.solve(sys.hessian * solver.solve(residual));
    }
    const auto& diag = solver.vectorD();
    if (solver.info() != Eigen::Success || !nu.allFinite() || diag.minCoeff() <= 0.0) {
        throw DiceSolveError("dualdice: singular system despite ridge; pivot range [" + std::to_string(diag.minCoeff()) +
                             ", " + std::to_string(diag.maxCoeff()) + "], ridge=" + std::to_string(ridge));
    }
    NuFunction out;
    out.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        nu.data(), d.n_states(), d.n_actions());
    return out;
}

/// Bellman residuals of nu on each dataset-supported pair, averaged over that pair's records.
inline DiceWeights weights_from_nu(const NuFunction& nu, const Dataset& d, const Policy& pi, double gamma) {
    detail::check_dice_inputs(d, pi, gamma);
    const int S = d.n_states(), A = d.n_actions();
    Eigen::MatrixXd continuation_sum = Eigen::MatrixXd::Zero(S, A);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(S, A);
    for (const auto& r : d.records) {
        counts(r.state, r.action) += 1.0;
        if (!r.done) continuation_sum(r.state, r.action) += detail::continuation(nu, pi, r.next_state);
    }
    DiceWeights out{Eigen::MatrixXd::Zero(S, A), std::vector<bool>(static_cast<std::size_t>(S) * A, false)};
    for (StateId s = 0; s < S; ++s) {
        for (ActionId a = 0; a < A; ++a) {
            if (counts(s, a) == 0.0) continue;
            out.support[static_cast<std::size_t>(s) * A + a] = true;
            out.w(s, a) = nu.values(s, a) - gamma * continuation_sum(s, a) / counts(s, a);
        }
    }
    return out;
}

/// Ratio d^pi / dD from the exact visitation distribution; zero where dD vanishes.
inline DiceWeights exact_weights_oracle(const TabularMdp& mdp, const Policy& pi, const Eigen::MatrixXd& dD) {
    if (dD.rows() != mdp.n_states || dD.cols() != mdp.n_actions)
        throw std::invalid_argument("exact_weights_oracle: dD shape does not match mdp");
    const Eigen::MatrixXd d_pi = visitation_distribution_exact(mdp, pi);
    DiceWeights out{Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_actions),
                    std::vector<bool>(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, false)};
    int unsupported = 0;
    for (StateId s = 0; s < mdp.n_states; ++s) {
        for (ActionId a = 0; a < mdp.n_actions; ++a) {
            if (dD(s, a) > 0.0) {
                out.support[mdp.pair_index(s, a)] = true;
                out.w(s, a) = d_pi(s, a) / dD(s, a);
            } else {
                ++unsupported;
            }
        }
    }
    if (unsupported > 0) spdlog::debug("exact_weights_oracle: {} pairs with dD = 0 mapped to w = 0", unsupported);
    return out;
}

/// (1/N) sum_i w(s_i, a_i) r_i.
inline double dice_value_estimate(const DiceWeights& w, const Dataset& d) {
    if (d.empty()) throw std::invalid_argument("dice_value_estimate: empty dataset");
    double total = 0.0;
    for (const auto& r : d.records) total += w.w(r.state, r.action) * r.reward;
    return total / static_cast<double>(d.size());
}

/// (1/N) sum_i w(s_i, a_i); equals one when d^pi is covered by the data.
inline double dice_weight_mean(const DiceWeights& w, const Dataset& d) {
    double total = 0.0;
    for (const auto& r : d.records) total += w.w(r.state, r.action);
    return total / static_cast<double>(d.size());
}

/// Diagnostic dump of nu and w as JSON.
inline void write_dice_tables(const std::filesystem::path& path, const NuFunction& nu, const DiceWeights& w) {
    auto table = [](const Eigen::MatrixXd& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index s = 0; s < m.rows(); ++s) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index a = 0; a < m.cols(); ++a) row.push_back(m(s, a));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    nlohmann::json support = nlohmann::json::array();
    for (std::size_t i = 0; i < w.support.size(); ++i)
        if (w.support[i]) support.push_back(i);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_dice_tables: cannot open " + path.string());
    out << nlohmann::json{{"nu", table(nu.values)}, {"w", table(w.w)}, {"support", support}}.dump(1) << '\n';
}

}  // namespace simudice
