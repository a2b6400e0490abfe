#pragma once

#include <capo/exact.hpp>
#include <capo/mdp.hpp>
#include <capo/policy.hpp>
#include <capo/rng.hpp>

#include <Eigen/Dense>

#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace capo {

/// Coordinates selected for one update iteration.
struct CoordinateBatch {
    std::vector<std::pair<int, int>> pairs;  // (state, action)
    long iteration = 0;
};

// Coordinate generators. Cyclic and Batch are deterministic; Randomized
// draws one pair per iteration from d_gen; BehaviorEpsGreedy emits the
// pairs visited by an epsilon-greedy rollout of the current policy
// (repeats kept, applied sequentially).
struct CyclicGenerator {
    std::vector<std::pair<int, int>> order;  // empty -> row-major (s,a) enumeration
};
struct RandomizedGenerator {
    Eigen::MatrixXd d_gen;  // strictly positive over (s,a)
};
struct BatchGenerator {};
struct BehaviorEpsGreedyGenerator {
    double eps_start = 1.0;
    double eps_decay = 0.995;
    double eps_floor = 0.1;
    int rollout_len = 16;
};
using Generator =
    std::variant<CyclicGenerator, RandomizedGenerator, BatchGenerator, BehaviorEpsGreedyGenerator>;

// Step-size rules for the coordinate update.
struct CapoAlphaRule {
    double clip = 50.0;  // +infinity pins alpha = log(1/pi) exactly
};
struct FixedEtaRule {
    double eta = 0.1;
};
struct OnCapoRule {
    OnCapoConfig* cfg = nullptr;  // visit counts are bumped on selection
};
using StepRule = std::variant<CapoAlphaRule, FixedEtaRule, OnCapoRule>;

enum class ApplyMode {
    simultaneous,  // all alphas from the pre-update table; batch must be duplicate-free
    sequential,    // pairs applied in order, alpha recomputed per pair
};

/// theta(s,a) += alpha(s,a) * sign(s,a) for the batch coordinates.
/// adv_signs is a full (s,a) table of {-1,0,+1}.
void capo_update(SoftmaxTable& table, const CoordinateBatch& batch,
                 const Eigen::MatrixXi& adv_signs, const StepRule& rule,
                 ApplyMode mode = ApplyMode::simultaneous);

/// Per-action probability change for one updated state; entries sum to 0.
struct WeightDelta {
    Eigen::VectorXd delta;
};

/// Closed form for the probability change of a single-coordinate update with
/// alpha = log(1/pi) exactly. sign must be +1 or -1.
WeightDelta predicted_weight_delta(const Eigen::VectorXd& pi_row, int a_m, int sign);

/// Closed form for the full-batch update with alpha = log(1/pi) exactly:
/// new weights proportional to 1 / pi / pi^2 for signs +1 / 0 / -1.
Eigen::VectorXd batch_capo_weights(const Eigen::VectorXd& pi_row,
                                   const Eigen::VectorXi& adv_signs_row);

/// One-step value improvement of a single-coordinate update under a fixed
/// step eta, given the updated policy's visitation weight d_next of the
/// updated state. Returns 0 when adv_am == 0.
double fixed_lr_one_step_improvement(double d_next, double pi_am, double adv_am, double eta,
                                     double gamma);

/// Produces the iteration-m batch for the given generator.
CoordinateBatch next_batch(const Generator& gen, long iteration, const SoftmaxTable& table,
                           const TabularMdp& mdp, Xoshiro256pp& rng);

enum class CriticMode { exact, retrace };

struct RetraceCriticOptions {
    int n_rollouts = 1;
    int rollout_len = 20;
    std::size_t buffer_capacity = 64;
    int sweeps = 10;
    double kappa = 0.1;
    double lambda = 1.0;
    double eps_start = 1.0;
    double eps_decay = 0.995;
    double eps_floor = 0.1;
};

struct TrainOptions {
    std::optional<Eigen::MatrixXd> theta0;  // default: zeros (uniform policy)
    double stop_gap = 0.0;                  // > 0: stop once the gap falls below
    double vstar_tol = 1e-10;
    double sign_dead_zone = 1e-8;           // sample-based critic only
    RetraceCriticOptions retrace;
};

struct TrainRecord {
    long m = 0;         // number of updates applied so far
    double v_mu = 0.0;  // exact V(mu) of the current policy
    double gap = 0.0;   // V*(mu) - V^pi(mu)
    Eigen::VectorXd v;  // exact per-state values
};

/// Off-policy CAPO training loop. Exact values are logged every iteration
/// regardless of the critic. History holds iters+1 records including the
/// initial policy (fewer if stop_gap triggers). final_table, when given,
/// receives the trained parameters for checkpointing.
std::vector<TrainRecord> train(const TabularMdp& mdp, Generator gen, StepRule rule,
                               CriticMode critic, long iters, const Eigen::VectorXd& start_dist,
                               Xoshiro256pp& rng, const TrainOptions& opt = {},
                               SoftmaxTable* final_table = nullptr);

}  // namespace capo
