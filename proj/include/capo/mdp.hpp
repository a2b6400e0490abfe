#pragma once

#include <capo/rng.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace capo {

/// Finite MDP. transition[a](s, s') is the probability of landing in s'
/// after taking action a in state s; every such row is a distribution.
/// Terminal states self-loop with probability 1 and reward 0.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Eigen::MatrixXd> transition;
    Eigen::MatrixXd reward;  // (s, a)
    double gamma = 0.9;
    Eigen::VectorXd start_dist;
    std::vector<bool> terminal;

    double p(int s, int a, int s2) const { return transition[a](s, s2); }
    bool is_terminal(int s) const { return terminal[s]; }
};

/// Throws std::invalid_argument when a structural invariant is broken.
void validate(const TabularMdp& mdp);

struct Transition {
    int state;
    int action;
    double reward;
    int next_state;
    double behavior_prob;  // probability the behavior policy assigned to `action`
};

struct Rollout {
    std::vector<Transition> steps;
    int length() const { return static_cast<int>(steps.size()); }
};

/// Deterministic K-arm bandit: one decision state, one absorbing sink.
/// Every arm pays its reward once and absorbs, so V(start) = pi . r for
/// any discount.
TabularMdp make_bandit(const std::vector<double>& arm_rewards, double gamma = 0.9);

// Chain action indices.
inline constexpr int kChainTerminate = 0;
inline constexpr int kChainRight = 1;

/// Chain of states S0..Sn; the agent starts at S1. TERMINATE pays
/// step_reward and absorbs into S0; RIGHT pays nothing except the final
/// hop S_{n-1} -> S_n, which pays goal_reward. S0 and Sn are absorbing.
TabularMdp make_chain(int n, double step_reward = 0.1, double goal_reward = 100.0,
                      double gamma = 0.99);

/// Seeded fixture generator: Dirichlet(1) transition rows, rewards uniform
/// in [0,1], uniform start distribution, no terminal states.
TabularMdp make_random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed);

/// Samples a trajectory under `policy` (rows are action distributions).
/// Stops at max_len or on entering a terminal state, whichever comes first.
Rollout sample_rollout(const TabularMdp& mdp, const Eigen::MatrixXd& policy,
                       int start_state, int max_len, Xoshiro256pp& rng);

}  // namespace capo
