#pragma once

#include <capo/mdp.hpp>
#include <capo/policy.hpp>
#include <capo/rng.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace capo {

/// One seed's result of a bandit study.
struct BanditRunOutcome {
    std::uint64_t seed = 0;
    double final_pi_star = 0.0;  // probability of the best arm at the end
    bool stuck = false;          // some sub-optimal arm exceeds the stuck threshold
    bool converged = false;      // best arm exceeds the convergence threshold
    long iterations = 0;
};

/// One on-policy CAPO update: draws a state from the current policy's
/// discounted visitation (restricted to non-terminal states), an action from
/// pi(.|s), bumps N(s,a), and moves that coordinate by
/// oncapo_alpha * sign(A) with the exact advantage.
void oncapo_step(SoftmaxTable& table, const TabularMdp& mdp, OnCapoConfig& cfg,
                 Xoshiro256pp& rng);

/// Same sampling, but the sampled coordinate moves by a constant eta * sign(A).
void oncapo_fixed_step(SoftmaxTable& table, const TabularMdp& mdp, double eta,
                       Xoshiro256pp& rng);

/// Vanilla stochastic policy gradient on a single-state bandit:
/// sample a ~ pi, then theta(a') += eta * (I[a = a'] - pi(a')) * r(a).
void spg_step(Eigen::VectorXd& theta, const Eigen::VectorXd& arm_rewards, double eta,
              Xoshiro256pp& rng);

/// Importance-sampled stochastic policy gradient on a single-state bandit:
/// rhat(a') = I[a = a'] r(a') / pi(a'), theta(a') += eta * pi(a') * (rhat(a') - pi . rhat).
void is_spg_step(Eigen::VectorXd& theta, const Eigen::VectorXd& arm_rewards, double eta,
                 Xoshiro256pp& rng);

/// Off-PAC actor update with a fixed behavior policy: draws s from the
/// behavior's discounted visitation, a from behavior(.|s), and ascends
/// eta * (pi/behavior)(a|s) * Q(s,a) * grad log pi(a|s) on row s.
void offpac_step(SoftmaxTable& table, const TabularMdp& mdp, const Eigen::MatrixXd& behavior,
                 const Eigen::MatrixXd& q_exact, double eta, Xoshiro256pp& rng);

enum class BanditAlgo {
    oncapo,         // on-policy CAPO, variable step
    oncapo_fixed,   // on-policy CAPO, fixed step
    offcapo,        // CAPO with a uniform random coordinate generator, variable step
    offcapo_fixed,  // same generator, fixed step
    spg,            // vanilla stochastic policy gradient
    is_spg,         // importance-sampled stochastic policy gradient
};

struct BanditStudyConfig {
    double eta = 0.1;                   // fixed-step algorithms
    double beta = 0.2;                  // on-policy CAPO
    double zeta = 0.25;                 // on-policy CAPO
    double clip = 50.0;                 // variable-step CAPO
    double stuck_threshold = 0.99;
    double converged_threshold = 0.99;
    std::uint64_t base_seed = 0;        // seed i runs on stream(base_seed, i)
};

struct BanditStudyResult {
    std::vector<BanditRunOutcome> outcomes;
    std::vector<double> mean_pi_star;  // per iteration, averaged over seeds
    std::vector<double> std_pi_star;
};

/// Runs `algo` on the bandit for n_seeds independent seeds and n_iters
/// iterations each. Deterministic per seed.
BanditStudyResult run_bandit_study(BanditAlgo algo, const std::vector<double>& arm_rewards,
                                   const std::vector<double>& theta0, int n_seeds, long n_iters,
                                   const BanditStudyConfig& cfg = {});

}  // namespace capo
