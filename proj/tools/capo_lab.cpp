// capo_lab: experiment registry and CSV emitter for the tabular RL lab.
//
// Subcommands: validate, bandit-study, rate-check, chain-compare,
// ncapo-chain, oracle-suite. Each takes --config and optional --out /
// --seeds overrides; every run is deterministic per seed.

#include <capo/baselines.hpp>
#include <capo/capo.hpp>
#include <capo/config.hpp>
#include <capo/csv.hpp>
#include <capo/exact.hpp>
#include <capo/mdp.hpp>
#include <capo/ncapo.hpp>
#include <capo/oracles.hpp>

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace {

using namespace capo;

TabularMdp build_env(const ExperimentConfig& cfg) {
    if (cfg.env == "bandit") return make_bandit(cfg.bandit_rewards, cfg.gamma);
    if (cfg.env == "chain")
        return make_chain(cfg.chain_n, cfg.chain_step_reward, cfg.chain_goal_reward, cfg.gamma);
    return make_random_mdp(cfg.n_states, cfg.n_actions, cfg.gamma, cfg.env_seed);
}

Generator build_generator(const ExperimentConfig& cfg, const TabularMdp& mdp) {
    if (cfg.generator == "cyclic") return CyclicGenerator{};
    if (cfg.generator == "batch") return BatchGenerator{};
    if (cfg.generator == "randomized") {
        const double p = 1.0 / (mdp.n_states * mdp.n_actions);
        return RandomizedGenerator{Eigen::MatrixXd::Constant(mdp.n_states, mdp.n_actions, p)};
    }
    return BehaviorEpsGreedyGenerator{cfg.eps_start, cfg.eps_decay, cfg.eps_floor,
                                      cfg.rollout_len};
}

StepRule build_step_rule(const ExperimentConfig& cfg) {
    if (cfg.step_rule == "fixed") return FixedEtaRule{cfg.eta};
    return CapoAlphaRule{cfg.clip};
}

std::string out_path(const ExperimentConfig& cfg, const std::string& stem) {
    std::filesystem::create_directories(cfg.out_dir);
    return cfg.out_dir + "/" + stem + ".csv";
}

std::vector<std::string> history_header(int n_states) {
    std::vector<std::string> header = {"m", "v_mu", "gap"};
    for (int s = 0; s < n_states; ++s) header.push_back("v_s" + std::to_string(s));
    return header;
}

void write_history(const std::string& path, const std::vector<TrainRecord>& history) {
    if (history.empty()) return;
    CsvWriter csv(path, history_header(static_cast<int>(history.front().v.size())));
    for (const TrainRecord& rec : history) {
        std::vector<double> row = {static_cast<double>(rec.m), rec.v_mu, rec.gap};
        for (int s = 0; s < rec.v.size(); ++s) row.push_back(rec.v(s));
        csv.row(row);
    }
}

/// Suboptimality constant of the configured generator's rate bound;
/// returns the bound value at update count m >= 1.
double rate_bound(const ExperimentConfig& cfg, const TabularMdp& mdp, long m) {
    const Eigen::VectorXd& mu = mdp.start_dist;
    const double one_minus_gamma = 1.0 - mdp.gamma;
    const double inv_mu_norm = 1.0 / mu.minCoeff();        // ||1/mu||_inf
    const double mu_min = mu.minCoeff();
    const double sa = static_cast<double>(mdp.n_states) * mdp.n_actions;

    if (cfg.generator == "batch") {
        const double c = std::pow(one_minus_gamma, 4) / mdp.n_actions / inv_mu_norm * mu_min;
        return 1.0 / (c * m);
    }
    if (cfg.generator == "randomized") {
        const double dgen_mu = (1.0 / sa) * mu_min;
        const double c = std::pow(one_minus_gamma, 4) / 2.0 / inv_mu_norm * dgen_mu;
        return 1.0 / (c * m);
    }
    // cyclic
    const double c = std::pow(one_minus_gamma, 4) / 2.0 / inv_mu_norm *
                     std::min(mu_min / 2.0, one_minus_gamma / sa);
    return sa / (c * m);
}

int cmd_validate(const ExperimentConfig& cfg) {
    const TabularMdp mdp = build_env(cfg);
    validate(mdp);
    std::cout << "ok: configuration and environment are valid ("
              << mdp.n_states << " states, " << mdp.n_actions << " actions)\n";
    return 0;
}

int cmd_bandit_study(const ExperimentConfig& cfg, int n_seeds) {
    BanditAlgo algo;
    if (cfg.algorithm == "oncapo") algo = BanditAlgo::oncapo;
    else if (cfg.algorithm == "oncapo_fixed") algo = BanditAlgo::oncapo_fixed;
    else if (cfg.algorithm == "offcapo") algo = BanditAlgo::offcapo;
    else if (cfg.algorithm == "offcapo_fixed") algo = BanditAlgo::offcapo_fixed;
    else if (cfg.algorithm == "spg") algo = BanditAlgo::spg;
    else algo = BanditAlgo::is_spg;

    BanditStudyConfig study;
    study.eta = cfg.eta;
    study.beta = cfg.beta;
    study.zeta = cfg.zeta;
    study.clip = cfg.clip;
    study.stuck_threshold = cfg.stuck_threshold;
    study.converged_threshold = cfg.converged_threshold;
    study.base_seed = cfg.seeds.front();

    const BanditStudyResult result =
        run_bandit_study(algo, cfg.bandit_rewards, cfg.theta0, n_seeds, cfg.iters, study);

    CsvWriter outcomes(out_path(cfg, cfg.experiment + "_outcomes"),
                       {"seed", "final_pi_star", "stuck", "converged", "iterations"});
    long n_stuck = 0, n_converged = 0;
    for (const BanditRunOutcome& o : result.outcomes) {
        outcomes.row({static_cast<double>(o.seed), o.final_pi_star,
                      o.stuck ? 1.0 : 0.0, o.converged ? 1.0 : 0.0,
                      static_cast<double>(o.iterations)});
        n_stuck += o.stuck;
        n_converged += o.converged;
    }
    CsvWriter curve(out_path(cfg, cfg.experiment + "_curve"),
                    {"iteration", "mean_pi_star", "std_pi_star"});
    for (std::size_t t = 0; t < result.mean_pi_star.size(); ++t)
        curve.row({static_cast<double>(t), result.mean_pi_star[t], result.std_pi_star[t]});

    std::cout << cfg.algorithm << " on " << n_seeds << " seeds: stuck fraction "
              << static_cast<double>(n_stuck) / n_seeds << ", converged fraction "
              << static_cast<double>(n_converged) / n_seeds << "\n";
    return 0;
}

int cmd_rate_check(const ExperimentConfig& cfg) {
    const TabularMdp mdp = build_env(cfg);
    bool all_ok = true;

    // Mean gap across seeds; the randomized bound is stated in expectation.
    std::vector<double> mean_gap(static_cast<std::size_t>(cfg.iters) + 1, 0.0);
    std::size_t shortest = mean_gap.size();

    for (const std::uint64_t seed : cfg.seeds) {
        Xoshiro256pp rng = Xoshiro256pp::stream(seed, 0);
        SoftmaxTable final_table(mdp.n_states, mdp.n_actions);
        const std::vector<TrainRecord> history =
            train(mdp, build_generator(cfg, mdp), build_step_rule(cfg),
                  cfg.critic == "retrace" ? CriticMode::retrace : CriticMode::exact,
                  cfg.iters, mdp.start_dist, rng, TrainOptions{}, &final_table);
        write_history(out_path(cfg, cfg.experiment + "_" + std::to_string(seed)), history);
        save_table_csv(out_path(cfg, cfg.experiment + "_theta_" + std::to_string(seed)),
                       final_table.theta);
        shortest = std::min(shortest, history.size());
        for (std::size_t i = 0; i < history.size(); ++i) mean_gap[i] += history[i].gap;
    }
    for (double& g : mean_gap) g /= static_cast<double>(cfg.seeds.size());

    const double slack = cfg.generator == "randomized" ? 1.2 : 1.0;
    for (std::size_t i = 1; i < shortest; ++i) {
        const double bound = slack * rate_bound(cfg, mdp, static_cast<long>(i));
        if (mean_gap[i] > bound) {
            std::cout << "bound violated at m=" << i << ": gap " << mean_gap[i] << " > "
                      << bound << "\n";
            all_ok = false;
        }
    }
    std::cout << (all_ok ? "rate bound holds" : "rate bound violated") << " for "
              << cfg.generator << " over " << cfg.seeds.size() << " seed(s), "
              << cfg.iters << " iterations\n";
    return all_ok ? 0 : 1;
}

int cmd_chain_compare(const ExperimentConfig& cfg) {
    const TabularMdp mdp = make_chain(cfg.chain_n, cfg.chain_step_reward, cfg.chain_goal_reward,
                                      cfg.gamma);
    const OptimalValues best = optimal_values(mdp);
    const double vstar_s1 = best.v_star(1);

    for (const std::uint64_t seed : cfg.seeds) {
        Xoshiro256pp rng_cyc = Xoshiro256pp::stream(seed, 1);
        const auto cyclic = train(mdp, CyclicGenerator{}, CapoAlphaRule{cfg.clip},
                                  CriticMode::exact, cfg.iters, mdp.start_dist, rng_cyc);
        write_history(out_path(cfg, cfg.experiment + "_cyclic_" + std::to_string(seed)), cyclic);

        Xoshiro256pp rng_bat = Xoshiro256pp::stream(seed, 2);
        const auto batch =
            train(mdp, BatchGenerator{}, CapoAlphaRule{std::numeric_limits<double>::infinity()},
                  CriticMode::exact, cfg.iters, mdp.start_dist, rng_bat);
        write_history(out_path(cfg, cfg.experiment + "_batch_" + std::to_string(seed)), batch);

        // Off-PAC actor with a fixed uniform behavior policy and exact critic.
        Xoshiro256pp rng_off = Xoshiro256pp::stream(seed, 3);
        const Eigen::MatrixXd uniform =
            Eigen::MatrixXd::Constant(mdp.n_states, mdp.n_actions, 1.0 / mdp.n_actions);
        SoftmaxTable table(mdp.n_states, mdp.n_actions);
        std::vector<TrainRecord> offpac;
        const double vstar_mu = mdp.start_dist.dot(best.v_star);
        for (long m = 0; m <= cfg.iters; ++m) {
            const ValueProfile profile = policy_eval(mdp, table.probs());
            offpac.push_back({m, mdp.start_dist.dot(profile.v),
                              vstar_mu - mdp.start_dist.dot(profile.v), profile.v});
            if (m == cfg.iters) break;
            offpac_step(table, mdp, uniform, profile.q, cfg.offpac_eta, rng_off);
        }
        write_history(out_path(cfg, cfg.experiment + "_offpac_" + std::to_string(seed)), offpac);

        std::cout << "seed " << seed << ": V(S1)/V* cyclic "
                  << cyclic.back().v(1) / vstar_s1 << ", batch " << batch.back().v(1) / vstar_s1
                  << ", offpac " << offpac.back().v(1) / vstar_s1 << "\n";
    }
    return 0;
}

int cmd_ncapo_chain(const ExperimentConfig& cfg) {
    const TabularMdp mdp = make_chain(cfg.chain_n, cfg.chain_step_reward, cfg.chain_goal_reward,
                                      cfg.gamma);
    const double vstar_s1 = optimal_values(mdp).v_star(1);

    for (const std::uint64_t seed : cfg.seeds) {
        NcapoConfig ncfg;
        ncfg.hidden = cfg.hidden;
        ncfg.lr = cfg.lr;
        ncfg.grad_steps = cfg.grad_steps;
        ncfg.batch_size = cfg.batch_size;
        ncfg.generator = cfg.ncapo_generator == "batch" ? NcapoGen::batch : NcapoGen::cyclic;
        ncfg.clip = cfg.clip;
        ncfg.kl_reverse = cfg.kl_reverse;
        ncfg.iters = cfg.iters;
        ncfg.seed = seed;
        ncfg.n_rollouts = cfg.n_rollouts;
        ncfg.rollout_len = cfg.rollout_len;
        ncfg.buffer_capacity = static_cast<std::size_t>(cfg.buffer_capacity);
        ncfg.kappa = cfg.kappa;
        ncfg.lambda = cfg.lambda;
        ncfg.tau_q = cfg.tau_q;
        ncfg.tau_theta = cfg.tau_theta;
        ncfg.eps_start = cfg.eps_start;
        ncfg.eps_decay = cfg.eps_decay;
        ncfg.eps_floor = cfg.eps_floor;

        const NcapoMode mode = cfg.ncapo_mode == "replay_retrace" ? NcapoMode::replay_retrace
                                                                  : NcapoMode::exact_adv;
        MlpPolicy final_net;
        const auto history = train_ncapo(mdp, mode, ncfg, &final_net);
        save_mlp_csv(out_path(cfg, cfg.experiment + "_weights_" + std::to_string(seed)),
                     final_net);

        CsvWriter csv(out_path(cfg, cfg.experiment + "_" + std::to_string(seed)),
                      {"iteration", "v_mu", "loss"});
        for (const NcapoRecord& rec : history)
            csv.row({static_cast<double>(rec.iteration), rec.v_mu, rec.loss});
        std::cout << "seed " << seed << ": final V(S1)/V* "
                  << history.back().v_mu / vstar_s1 << "\n";
    }
    return 0;
}

int cmd_oracle_suite(const ExperimentConfig& cfg) {
    bool all_ok = true;
    for (const OracleCheck& check : run_oracle_checks(cfg.seeds.front())) {
        std::cout << (check.pass ? "PASS " : "FAIL ") << check.name << " (" << check.instances
                  << " instances, max err " << check.max_err << ", tol " << check.tol << ")\n";
        all_ok &= check.pass;
    }
    return all_ok ? 0 : 1;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) seeds.push_back(std::stoull(item));
    if (seeds.empty()) throw std::invalid_argument("--seeds: empty list");
    return seeds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular coordinate-ascent policy optimization lab"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path;
    std::string out_override;
    std::string seeds_override;
    int n_seeds = 100;
    app.add_option("--config", config_path, "Path to the INI config file")->required();
    app.add_option("--out", out_override, "Override the output directory");
    app.add_option("--seeds", seeds_override, "Override the seed list, e.g. 1,2,3");
    app.add_option("--n-seeds", n_seeds, "Number of study seeds (bandit-study only)");

    const std::vector<std::string> names = {"validate",      "bandit-study", "rate-check",
                                            "chain-compare", "ncapo-chain",  "oracle-suite"};
    for (const auto& name : names) app.add_subcommand(name);

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = load_config(config_path);
        if (!out_override.empty()) cfg.out_dir = out_override;
        if (!seeds_override.empty()) cfg.seeds = parse_seed_list(seeds_override);

        const std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "validate") return cmd_validate(cfg);
        if (sub == "bandit-study") return cmd_bandit_study(cfg, n_seeds);
        if (sub == "rate-check") return cmd_rate_check(cfg);
        if (sub == "chain-compare") return cmd_chain_compare(cfg);
        if (sub == "ncapo-chain") return cmd_ncapo_chain(cfg);
        return cmd_oracle_suite(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
