#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace capo {

/// Experiment configuration parsed from INI-style text: [section] headers,
/// key = value lines, `#` or `;` comments. Unknown keys are rejected.
struct ExperimentConfig {
    // [run]
    std::string experiment = "validate";
    std::vector<std::uint64_t> seeds = {1};
    long iters = 1000;
    std::string out_dir = "out";

    // [env]
    std::string env = "random";  // bandit | chain | random
    std::vector<double> bandit_rewards = {1.0, 0.99, -1.0};
    int chain_n = 10;
    double chain_step_reward = 0.1;
    double chain_goal_reward = 100.0;
    int n_states = 3;
    int n_actions = 2;
    double gamma = 0.9;
    std::uint64_t env_seed = 1;

    // [algo]
    std::string generator = "cyclic";  // cyclic | randomized | batch | behavior
    std::string step_rule = "variable";  // variable | fixed
    double clip = 50.0;
    double eta = 0.1;
    std::string algorithm = "oncapo";  // bandit-study algorithm name
    double beta = 0.2;
    double zeta = 0.25;
    std::vector<double> theta0;  // bandit initial parameters; empty = zeros
    std::string critic = "exact";  // exact | retrace
    double lambda = 1.0;
    double kappa = 0.1;
    long buffer_capacity = 6400;
    int sweeps = 10;
    int rollout_len = 16;
    int n_rollouts = 1;
    double eps_start = 1.0;
    double eps_decay = 0.995;
    double eps_floor = 0.1;
    double offpac_eta = 0.001;
    double stuck_threshold = 0.99;
    double converged_threshold = 0.99;

    // [ncapo]
    std::string ncapo_mode = "exact_adv";  // exact_adv | replay_retrace
    std::string ncapo_generator = "cyclic";  // cyclic | batch
    int hidden = 256;
    double lr = 0.001;
    int grad_steps = 30;
    int batch_size = 16;
    double tau_q = 0.05;
    double tau_theta = 1.0;
    bool kl_reverse = false;
};

/// Parses and range-checks a config file. Throws std::invalid_argument with
/// a one-line diagnostic on parse failure, unknown key, or range violation.
ExperimentConfig load_config(const std::string& path);

/// Same, from already-loaded text (used by tests).
ExperimentConfig parse_config(const std::string& text);

}  // namespace capo
