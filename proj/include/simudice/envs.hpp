#pragma once

#include "simudice/mdp.hpp"
#include "simudice/rng.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace simudice {

/// `Custom` marks hand-built MDPs used in tests; it has no file representation.
enum class EnvName { Taxi, FrozenLake, CliffWalking, Custom };

struct EnvSpec {
    EnvName name = EnvName::Custom;
    int n_states = 0;
    int n_actions = 0;
    int max_episode_steps = 100;

    friend bool operator==(const EnvSpec&, const EnvSpec&) = default;
};

inline std::string_view to_string(EnvName name) {
    switch (name) {
        case EnvName::Taxi: return "Taxi";
        case EnvName::FrozenLake: return "FrozenLake";
        case EnvName::CliffWalking: return "CliffWalking";
        case EnvName::Custom: return "Custom";
    }
    return "Custom";
}

inline std::optional<EnvName> parse_env_name(std::string_view text) {
    if (text == "Taxi") return EnvName::Taxi;
    if (text == "FrozenLake") return EnvName::FrozenLake;
    if (text == "CliffWalking") return EnvName::CliffWalking;
    return std::nullopt;
}

inline EnvSpec make_spec(EnvName name, int max_episode_steps = 100) {
    switch (name) {
        case EnvName::Taxi: return {name, 500, 6, max_episode_steps};
        case EnvName::FrozenLake: return {name, 16, 4, max_episode_steps};
        case EnvName::CliffWalking: return {name, 48, 4, max_episode_steps};
        case EnvName::Custom: break;
    }
    throw std::invalid_argument("make_spec: no built-in spec for Custom");
}

struct StepResult {
    StateId next_state;
    double reward;
    bool done;
    bool truncated;
};

/// Outcome of the deterministic dynamics, before episode bookkeeping.
struct Transition {
    StateId next_state;
    double reward;
    bool done;
};

// ---------------------------------------------------------------------------
// Taxi: 5x5 grid, 4 landmarks, passenger index 4 means "in taxi".
// ---------------------------------------------------------------------------
namespace taxi {

inline constexpr std::array<std::pair<int, int>, 4> kLocations{{{0, 0}, {0, 4}, {4, 0}, {4, 3}}};

// Map rows used for wall lookups; column 2*col+1 holds the cell, 2*col and
// 2*col+2 the borders on either side.
inline constexpr std::array<std::string_view, 7> kMap{
    "+---------+",
    "|R: | : :G|",
    "| : | : : |",
    "| : : : : |",
    "| | : | : |",
    "|Y| : |B: |",
    "+---------+",
};

enum Action : ActionId { South = 0, North = 1, East = 2, West = 3, Pickup = 4, Dropoff = 5 };

struct Decoded {
    int row;
    int col;
    int passenger;
    int destination;
};

constexpr StateId encode(int row, int col, int passenger, int destination) {
    return ((row * 5 + col) * 5 + passenger) * 4 + destination;
}

constexpr Decoded decode(StateId s) {
    Decoded d{};
    d.destination = s % 4;
    s /= 4;
    d.passenger = s % 5;
    s /= 5;
    d.col = s % 5;
    d.row = s / 5;
    return d;
}

constexpr bool is_start_state(StateId s) {
    const auto d = decode(s);
    return d.passenger < 4 && d.passenger != d.destination;
}

/// Reached only by a successful dropoff.
constexpr bool is_terminal(StateId s) {
    const auto d = decode(s);
    return d.passenger == d.destination && kLocations[d.destination] == std::pair{d.row, d.col};
}

inline Transition dynamics(StateId s, ActionId a) {
    const auto [row, col, passenger, destination] = decode(s);
    int new_row = row, new_col = col, new_passenger = passenger;
    double reward = -1.0;
    bool done = false;
    const std::pair<int, int> taxi_loc{row, col};
    switch (a) {
        case South: new_row = std::min(row + 1, 4); break;
        case North: new_row = std::max(row - 1, 0); break;
        case East:
            if (kMap[1 + row][2 * col + 2] == ':') new_col = std::min(col + 1, 4);
            break;
        case West:
            if (kMap[1 + row][2 * col] == ':') new_col = std::max(col - 1, 0);
            break;
        case Pickup:
            if (passenger < 4 && taxi_loc == kLocations[passenger]) new_passenger = 4;
            else reward = -10.0;
            break;
        case Dropoff: {
            const auto it = std::find(kLocations.begin(), kLocations.end(), taxi_loc);
            if (taxi_loc == kLocations[destination] && passenger == 4) {
                new_passenger = destination;
                done = true;
                reward = 20.0;
            } else if (it != kLocations.end() && passenger == 4) {
                new_passenger = static_cast<int>(it - kLocations.begin());
            } else {
                reward = -10.0;
            }
            break;
        }
        default: throw std::invalid_argument("taxi: invalid action");
    }
    return {encode(new_row, new_col, new_passenger, destination), reward, done};
}

}  // namespace taxi

// ---------------------------------------------------------------------------
// FrozenLake 4x4, non-slippery.
// ---------------------------------------------------------------------------
namespace frozen_lake {

inline constexpr std::array<std::string_view, 4> kMap{"SFFF", "FHFH", "FFFH", "HFFG"};

enum Action : ActionId { Left = 0, Down = 1, Right = 2, Up = 3 };

constexpr char tile(StateId s) { return kMap[s / 4][s % 4]; }
constexpr bool is_terminal(StateId s) { return tile(s) == 'H' || tile(s) == 'G'; }

inline Transition dynamics(StateId s, ActionId a) {
    int row = s / 4, col = s % 4;
    switch (a) {
        case Left: col = std::max(col - 1, 0); break;
        case Down: row = std::min(row + 1, 3); break;
        case Right: col = std::min(col + 1, 3); break;
        case Up: row = std::max(row - 1, 0); break;
        default: throw std::invalid_argument("frozen_lake: invalid action");
    }
    const StateId next = row * 4 + col;
    const char t = tile(next);
    return {next, t == 'G' ? 1.0 : 0.0, t == 'H' || t == 'G'};
}

}  // namespace frozen_lake

// ---------------------------------------------------------------------------
// CliffWalking 4x12. Entering the cliff costs -100 and teleports to start.
// ---------------------------------------------------------------------------
namespace cliff_walking {

inline constexpr StateId kStart = 36;
inline constexpr StateId kGoal = 47;

enum Action : ActionId { Up = 0, Right = 1, Down = 2, Left = 3 };

constexpr bool is_cliff(StateId s) { return s > 36 && s < 47; }
constexpr bool is_terminal(StateId s) { return s == kGoal; }

inline Transition dynamics(StateId s, ActionId a) {
    int row = s / 12, col = s % 12;
    switch (a) {
        case Up: row = std::max(row - 1, 0); break;
        case Right: col = std::min(col + 1, 11); break;
        case Down: row = std::min(row + 1, 3); break;
        case Left: col = std::max(col - 1, 0); break;
        default: throw std::invalid_argument("cliff_walking: invalid action");
    }
    const StateId next = row * 12 + col;
    if (is_cliff(next)) return {kStart, -100.0, false};
    return {next, -1.0, next == kGoal};
}

}  // namespace cliff_walking

inline bool is_terminal(EnvName name, StateId s) {
    switch (name) {
        case EnvName::Taxi: return taxi::is_terminal(s);
        case EnvName::FrozenLake: return frozen_lake::is_terminal(s);
        case EnvName::CliffWalking: return cliff_walking::is_terminal(s);
        case EnvName::Custom: break;
    }
    throw std::invalid_argument("is_terminal: unsupported environment");
}

/// Deterministic dynamics of a built-in environment. Throws on terminal states.
inline Transition dynamics(const EnvSpec& spec, StateId s, ActionId a) {
    if (s < 0 || s >= spec.n_states) throw std::out_of_range("dynamics: state out of range");
    if (a < 0 || a >= spec.n_actions) throw std::out_of_range("dynamics: action out of range");
    if (is_terminal(spec.name, s)) throw std::logic_error("dynamics: stepping a terminal state");
    switch (spec.name) {
        case EnvName::Taxi: return taxi::dynamics(s, a);
        case EnvName::FrozenLake: return frozen_lake::dynamics(s, a);
        case EnvName::CliffWalking: return cliff_walking::dynamics(s, a);
        case EnvName::Custom: break;
    }
    throw std::invalid_argument("dynamics: unsupported environment");
}

/// Initial-state distribution of a built-in environment.
inline Eigen::VectorXd initial_distribution(const EnvSpec& spec) {
    Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(spec.n_states);
    switch (spec.name) {
        case EnvName::Taxi:
            for (StateId s = 0; s < spec.n_states; ++s)
                if (taxi::is_start_state(s)) mu0(s) = 1.0;
            mu0 /= mu0.sum();
            break;
        case EnvName::FrozenLake: mu0(0) = 1.0; break;
        case EnvName::CliffWalking: mu0(cliff_walking::kStart) = 1.0; break;
        case EnvName::Custom: throw std::invalid_argument("initial_distribution: unsupported environment");
    }
    return mu0;
}

/// Exact tabular export. Terminal states become zero-reward self-loops.
inline TabularMdp to_tabular_mdp(const EnvSpec& spec, double gamma) {
    TabularMdp mdp(spec.n_states, spec.n_actions, gamma);
    mdp.mu0 = initial_distribution(spec);
    for (StateId s = 0; s < spec.n_states; ++s) {
        mdp.terminal[s] = is_terminal(spec.name, s);
        for (ActionId a = 0; a < spec.n_actions; ++a) {
            if (mdp.terminal[s]) {
                mdp.transition[mdp.pair_index(s, a)] = {{s, 1.0}};
                continue;
            }
            const auto t = dynamics(spec, s, a);
            mdp.transition[mdp.pair_index(s, a)] = {{t.next_state, 1.0}};
            mdp.reward(s, a) = t.reward;
        }
    }
    return mdp;
}

/**
 * Episodic wrapper holding the current state and elapsed step count.
 * One instance per thread.
 */
class Environment {
public:
    explicit Environment(EnvSpec spec) : spec_(spec), mu0_(initial_distribution(spec)) {}
    explicit Environment(EnvName name, int max_episode_steps = 100) : Environment(make_spec(name, max_episode_steps)) {}

    [[nodiscard]] const EnvSpec& spec() const { return spec_; }
    [[nodiscard]] StateId state() const { return state_; }
    [[nodiscard]] int elapsed_steps() const { return elapsed_; }

    StateId reset(Rng& rng) {
        state_ = static_cast<StateId>(rng.categorical({mu0_.data(), static_cast<std::size_t>(mu0_.size())}));
        elapsed_ = 0;
        finished_ = false;
        return state_;
    }

    StepResult step(ActionId action) {
        if (finished_) throw std::logic_error("Environment::step called after episode end; call reset()");
        const auto t = dynamics(spec_, state_, action);
        state_ = t.next_state;
        ++elapsed_;
        const bool truncated = !t.done && elapsed_ >= spec_.max_episode_steps;
        finished_ = t.done || truncated;
        return {t.next_state, t.reward, t.done, truncated};
    }

private:
    EnvSpec spec_;
    Eigen::VectorXd mu0_;
    StateId state_ = 0;
    int elapsed_ = 0;
    bool finished_ = true;
};

}  // namespace simudice
