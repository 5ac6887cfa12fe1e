#pragma once

#include "simudice/dataset.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace simudice {

struct ModelPrediction {
    StateId next_state;
    double reward;
    bool done;
};

class UnknownPairError : public std::out_of_range {
public:
    UnknownPairError(StateId s, ActionId a)
        : std::out_of_range("world model: unknown pair (" + std::to_string(s) + "," + std::to_string(a) + ")") {}
};

/**
 * Count-based tabular world model.
 *
 * Each observed (s, a) keeps its visit count, reward sum and a histogram of
 * successors (with how often each successor ended the episode). Predictions
 * return the modal successor (lowest id on ties), the mean reward of the pair,
 * and `done` by majority vote over the modal successor's observations.
 */
class TabularWorldModel {
public:
    struct SuccessorStats {
        long count = 0;
        long done_count = 0;
        friend bool operator==(const SuccessorStats&, const SuccessorStats&) = default;
    };

    struct Entry {
        long visit_count = 0;
        double reward_sum = 0.0;
        long done_count = 0;
        std::map<StateId, SuccessorStats> next_state_counts;
        friend bool operator==(const Entry&, const Entry&) = default;
    };

    static TabularWorldModel fit(const Dataset& d) {
        if (d.empty()) throw std::invalid_argument("world model: empty dataset");
        TabularWorldModel m(d.n_states(), d.n_actions());
        std::vector<long> start_counts(static_cast<std::size_t>(d.n_states()), 0);
        std::vector<std::vector<double>> rewards(m.entries_.size());
        for (const auto& r : d.records) {
            auto& e = m.entries_[m.index(r.state, r.action)];
            ++e.visit_count;
            rewards[m.index(r.state, r.action)].push_back(r.reward);
            auto& succ = e.next_state_counts[r.next_state];
            ++succ.count;
            if (r.done) {
                ++e.done_count;
                ++succ.done_count;
            }
            ++start_counts[static_cast<std::size_t>(r.episode_start_state)];
        }
        // Sorted summation keeps the model independent of record order.
        for (std::size_t i = 0; i < rewards.size(); ++i) {
            std::sort(rewards[i].begin(), rewards[i].end());
            for (double r : rewards[i]) m.entries_[i].reward_sum += r;
        }
        m.total_records_ = static_cast<long>(d.size());
        for (StateId s = 0; s < d.n_states(); ++s)
            m.mu0_hat_(s) = static_cast<double>(start_counts[static_cast<std::size_t>(s)]) / static_cast<double>(d.size());
        m.build_predictions();
        return m;
    }

    [[nodiscard]] int n_states() const { return n_states_; }
    [[nodiscard]] int n_actions() const { return n_actions_; }
    [[nodiscard]] long total_records() const { return total_records_; }
    [[nodiscard]] const Eigen::VectorXd& mu0_hat() const { return mu0_hat_; }
    [[nodiscard]] const Entry& entry(StateId s, ActionId a) const { return entries_[index(s, a)]; }
    [[nodiscard]] bool is_known(StateId s, ActionId a) const { return entries_[index(s, a)].visit_count > 0; }

    [[nodiscard]] std::size_t index(StateId s, ActionId a) const {
        return static_cast<std::size_t>(s) * n_actions_ + a;
    }

    [[nodiscard]] ModelPrediction predict(StateId s, ActionId a) const {
        const auto& p = predictions_[index(s, a)];
        if (!p) throw UnknownPairError(s, a);
        return *p;
    }

    /// Normalised visit frequency; zero for unobserved pairs.
    [[nodiscard]] double confidence(StateId s, ActionId a) const {
        return static_cast<double>(entries_[index(s, a)].visit_count) / static_cast<double>(total_records_);
    }

    /// Flat indices of all observed pairs, ascending.
    [[nodiscard]] std::vector<std::size_t> known_pairs() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (entries_[i].visit_count > 0) out.push_back(i);
        return out;
    }

    friend bool operator==(const TabularWorldModel& lhs, const TabularWorldModel& rhs) {
        return lhs.n_states_ == rhs.n_states_ && lhs.n_actions_ == rhs.n_actions_ &&
               lhs.total_records_ == rhs.total_records_ && lhs.entries_ == rhs.entries_ && lhs.mu0_hat_ == rhs.mu0_hat_;
    }

private:
    TabularWorldModel(int n_states, int n_actions)
        : n_states_(n_states),
          n_actions_(n_actions),
          entries_(static_cast<std::size_t>(n_states) * n_actions),
          predictions_(entries_.size()),
          mu0_hat_(Eigen::VectorXd::Zero(n_states)) {}

    void build_predictions() {
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const auto& e = entries_[i];
            if (e.visit_count == 0) continue;
            auto modal = e.next_state_counts.begin();
            for (auto it = e.next_state_counts.begin(); it != e.next_state_counts.end(); ++it)
                if (it->second.count > modal->second.count) modal = it;
            predictions_[i] = ModelPrediction{modal->first, e.reward_sum / static_cast<double>(e.visit_count),
                                              2 * modal->second.done_count > modal->second.count};
        }
    }

    int n_states_;
    int n_actions_;
    long total_records_ = 0;
    std::vector<Entry> entries_;
    std::vector<std::optional<ModelPrediction>> predictions_;
    Eigen::VectorXd mu0_hat_;
};

}  // namespace simudice
