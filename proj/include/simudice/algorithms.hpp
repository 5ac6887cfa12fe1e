#pragma once

#include "simudice/dataset.hpp"
#include "simudice/dice.hpp"
#include "simudice/qlearning.hpp"
#include "simudice/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace simudice {

/// How planning picks state-action pairs.
///   F1: C + softmax(w lambda) / lambda
///   F2: C - softmax(w lambda) / lambda
///   F3: 1/K + softmax(w lambda) / lambda, K = number of model-known pairs
///   Uniform: 1/K (offline Dyna-Q)
enum class SamplingFormula { F1, F2, F3, Uniform };

inline std::string_view to_string(SamplingFormula f) {
    switch (f) {
        case SamplingFormula::F1: return "F1";
        case SamplingFormula::F2: return "F2";
        case SamplingFormula::F3: return "F3";
        case SamplingFormula::Uniform: return "Uniform";
    }
    return "F1";
}

inline std::optional<SamplingFormula> parse_formula(std::string_view text) {
    if (text == "F1") return SamplingFormula::F1;
    if (text == "F2") return SamplingFormula::F2;
    if (text == "F3") return SamplingFormula::F3;
    if (text == "Uniform") return SamplingFormula::Uniform;
    return std::nullopt;
}

struct Hyperparams {
    double alpha = 0.1;
    double gamma = 0.99;
    int planning_steps = 10;
    int iterations = 1;
    double lambda = 1000.0;
    int replay_epochs = 10;
    SamplingFormula formula = SamplingFormula::F1;
    double ridge = 1e-8;

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("hyperparams: alpha must lie in (0, 1]");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("hyperparams: gamma must lie in [0, 1)");
        if (!(lambda > 0.0)) throw std::invalid_argument("hyperparams: lambda must be positive");
        if (planning_steps < 0) throw std::invalid_argument("hyperparams: planning_steps must be >= 0");
        if (iterations < 1) throw std::invalid_argument("hyperparams: iterations must be >= 1");
        if (replay_epochs < 0) throw std::invalid_argument("hyperparams: replay_epochs must be >= 0");
        if (!(ridge > 0.0)) throw std::invalid_argument("hyperparams: ridge must be positive");
    }
};

/**
 * Planner sampling table P(s, a) over model-known pairs.
 * Zero everywhere else; sums to one.
 */
class SamplingDistribution {
public:
    SamplingDistribution(int n_states, int n_actions, std::vector<std::size_t> support, std::vector<double> probs,
                         bool used_fallback)
        : n_states_(n_states),
          n_actions_(n_actions),
          support_(std::move(support)),
          probs_(std::move(probs)),
          used_fallback_(used_fallback) {
        cdf_.resize(probs_.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < probs_.size(); ++i) cdf_[i] = acc += probs_[i];
    }

    /// Flat index s * n_actions + a of a sampled pair.
    std::size_t sample(Rng& rng) const {
        const double u = rng.uniform() * cdf_.back();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.end()) --it;
        auto i = static_cast<std::size_t>(it - cdf_.begin());
        while (probs_[i] <= 0.0 && i > 0) --i;  // never land on a zero-mass pair
        return support_[i];
    }

    [[nodiscard]] Eigen::MatrixXd table() const {
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n_states_, n_actions_);
        for (std::size_t i = 0; i < support_.size(); ++i)
            t(static_cast<Eigen::Index>(support_[i] / n_actions_), static_cast<Eigen::Index>(support_[i] % n_actions_)) = probs_[i];
        return t;
    }

    [[nodiscard]] double probability(StateId s, ActionId a) const {
        const auto idx = static_cast<std::size_t>(s) * n_actions_ + a;
        const auto it = std::lower_bound(support_.begin(), support_.end(), idx);
        return (it != support_.end() && *it == idx) ? probs_[static_cast<std::size_t>(it - support_.begin())] : 0.0;
    }

    /// Shannon entropy in nats.
    [[nodiscard]] double entropy() const {
        double h = 0.0;
        for (double p : probs_)
            if (p > 0.0) h -= p * std::log(p);
        return h;
    }

    [[nodiscard]] const std::vector<std::size_t>& support() const { return support_; }
    [[nodiscard]] const std::vector<double>& probs() const { return probs_; }
    [[nodiscard]] bool used_fallback() const { return used_fallback_; }

private:
    int n_states_;
    int n_actions_;
    std::vector<std::size_t> support_;
    std::vector<double> probs_;
    std::vector<double> cdf_;
    bool used_fallback_;
};

/**
 * Likelihoods per formula over model-known pairs, clamped at zero and
 * normalised. The softmax runs over known pairs only and is computed with the
 * max subtracted, so large w * lambda does not overflow. If clamping removes
 * all mass the result falls back to confidence-proportional sampling.
 */
inline SamplingDistribution sampling_probabilities(const TabularWorldModel& m, const DiceWeights& w, double lambda,
                                                   SamplingFormula formula) {
    if (!(lambda > 0.0)) throw std::invalid_argument("sampling_probabilities: lambda must be positive");
    if (w.w.rows() != m.n_states() || w.w.cols() != m.n_actions())
        throw std::invalid_argument("sampling_probabilities: weight table shape does not match model");
    auto known = m.known_pairs();
    const std::size_t k = known.size();
    const int A = m.n_actions();
    auto state_of = [A](std::size_t idx) { return static_cast<StateId>(idx / A); };
    auto action_of = [A](std::size_t idx) { return static_cast<ActionId>(idx % A); };

    std::vector<double> confidence(k), soft(k);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
        confidence[i] = m.confidence(state_of(known[i]), action_of(known[i]));
        soft[i] = w.w(state_of(known[i]), action_of(known[i])) * lambda;
        max_logit = std::max(max_logit, soft[i]);
    }
    double partition = 0.0;
    for (auto& x : soft) partition += x = std::exp(x - max_logit);
    for (auto& x : soft) x /= partition * lambda;

    std::vector<double> likelihood(k);
    const double uniform = 1.0 / static_cast<double>(k);
    for (std::size_t i = 0; i < k; ++i) {
        switch (formula) {
            case SamplingFormula::F1: likelihood[i] = confidence[i] + soft[i]; break;
            case SamplingFormula::F2: likelihood[i] = confidence[i] - soft[i]; break;
            case SamplingFormula::F3: likelihood[i] = uniform + soft[i]; break;
            case SamplingFormula::Uniform: likelihood[i] = uniform; break;
        }
        likelihood[i] = std::max(likelihood[i], 0.0);
    }
    double total = 0.0;
    for (double x : likelihood) total += x;
    bool fallback = false;
    if (!(total > 0.0)) {
        likelihood = confidence;
        total = 1.0;
        fallback = true;
    }
    for (auto& x : likelihood) x /= total;
    return SamplingDistribution(m.n_states(), m.n_actions(), std::move(known), std::move(likelihood), fallback);
}

/// `n_updates` Q-updates on model transitions drawn from `p`.
inline void plan(QTable& q, const TabularWorldModel& m, const SamplingDistribution& p, const Hyperparams& h,
                 long n_updates, Rng& rng) {
    const int A = m.n_actions();
    for (long i = 0; i < n_updates; ++i) {
        const std::size_t idx = p.sample(rng);
        const auto s = static_cast<StateId>(idx / A);
        const auto a = static_cast<ActionId>(idx % A);
        const auto pred = m.predict(s, a);
        q_update(q, s, a, pred.reward, pred.next_state, pred.done, h.alpha, h.gamma);
    }
}

/// Experience replay: replay_epochs * N uniformly drawn record updates from Q = 0.
inline QTable offline_q_learning(const Dataset& d, const Hyperparams& h, Rng& rng) {
    if (d.empty()) throw std::invalid_argument("offline_q_learning: empty dataset");
    QTable q(d.n_states(), d.n_actions());
    const long updates = static_cast<long>(h.replay_epochs) * static_cast<long>(d.size());
    for (long i = 0; i < updates; ++i) {
        const auto& r = d.records[rng.uniform_int(d.size())];
        q_update(q, r.state, r.action, r.reward, r.next_state, r.done, h.alpha, h.gamma);
    }
    return q;
}

struct IterationDiagnostics {
    double w_min = 0.0;
    double w_mean = 0.0;  // (1/N) sum_i w(s_i, a_i)
    double w_max = 0.0;
    double p_entropy = 0.0;
    double q_change_norm = 0.0;  // Frobenius norm of the planning update
    bool fallback = false;
};

struct LearnerResult {
    QTable q;
    Policy policy;
    std::vector<IterationDiagnostics> diagnostics;
};

namespace detail {

inline IterationDiagnostics weight_stats(const DiceWeights& w, const Dataset& d) {
    IterationDiagnostics diag;
    diag.w_min = std::numeric_limits<double>::infinity();
    diag.w_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < w.support.size(); ++i) {
        if (!w.support[i]) continue;
        const double x = w.w(static_cast<Eigen::Index>(i / w.w.cols()), static_cast<Eigen::Index>(i % w.w.cols()));
        diag.w_min = std::min(diag.w_min, x);
        diag.w_max = std::max(diag.w_max, x);
    }
    diag.w_mean = dice_weight_mean(w, d);
    return diag;
}

inline LearnerResult planning_loop(const Dataset& d, const Hyperparams& h, Rng& rng, bool use_dice) {
    h.validate();
    const auto model = TabularWorldModel::fit(d);
    QTable q = offline_q_learning(d, h, rng);
    LearnerResult result;
    const long n_updates = static_cast<long>(h.planning_steps) * static_cast<long>(d.size());
    for (int it = 0; it < h.iterations; ++it) {
        IterationDiagnostics diag;
        DiceWeights w{Eigen::MatrixXd::Zero(d.n_states(), d.n_actions()),
                      std::vector<bool>(static_cast<std::size_t>(d.n_states()) * d.n_actions(), false)};
        if (use_dice) {
            const Policy target = greedy_policy(q);
            w = weights_from_nu(solve_dualdice(d, target, h.gamma, h.ridge), d, target, h.gamma);
            diag = weight_stats(w, d);
        }
        const auto p = sampling_probabilities(model, w, h.lambda, use_dice ? h.formula : SamplingFormula::Uniform);
        diag.p_entropy = p.entropy();
        diag.fallback = p.used_fallback();
        const Eigen::MatrixXd before = q.values;
        plan(q, model, p, h, n_updates, rng);
        diag.q_change_norm = (q.values - before).norm();
        result.diagnostics.push_back(diag);
    }
    result.policy = greedy_policy(q);
    result.q = std::move(q);
    return result;
}

}  // namespace detail

/**
 * SimuDICE outer loop: fit the world model, learn an initial Q by experience
 * replay, then per iteration re-estimate DualDICE weights for the greedy
 * policy, rebuild the sampling distribution and plan
 * planning_steps * N model updates.
 */
inline LearnerResult run_simudice(const Dataset& d, const Hyperparams& h, Rng& rng) {
    return detail::planning_loop(d, h, rng, true);
}

/// Same loop with uniform sampling over known pairs and no DICE estimation.
inline LearnerResult run_offline_dyna_q(const Dataset& d, const Hyperparams& h, Rng& rng) {
    return detail::planning_loop(d, h, rng, false);
}

}  // namespace simudice
