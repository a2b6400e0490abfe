#include <capo/baselines.hpp>

#include <capo/capo.hpp>
#include <capo/exact.hpp>

#include <cmath>
#include <stdexcept>

namespace capo {

namespace {

// State drawn from the policy's discounted visitation, restricted to
// non-terminal states. Episodic environments put most visitation mass on
// their absorbing sinks, where coordinate updates are meaningless.
int sample_onpolicy_state(const TabularMdp& mdp, const Eigen::VectorXd& d, Xoshiro256pp& rng) {
    Eigen::VectorXd restricted = d;
    for (int s = 0; s < mdp.n_states; ++s)
        if (mdp.terminal[s]) restricted(s) = 0.0;
    const double total = restricted.sum();
    if (total <= 0.0) throw std::invalid_argument("on-policy step: no non-terminal state mass");
    restricted /= total;
    return sample_index(restricted, rng);
}

}  // namespace

void oncapo_step(SoftmaxTable& table, const TabularMdp& mdp, OnCapoConfig& cfg,
                 Xoshiro256pp& rng) {
    cfg.validate(mdp.n_actions);
    const ValueProfile profile = policy_eval(mdp, table.probs());
    const int s = sample_onpolicy_state(mdp, profile.visitation, rng);
    const int a = sample_index(table.action_probs(s), rng);

    cfg.visit_counts(s, a) += 1;
    const double adv = profile.adv(s, a);
    const int sign = adv > 0.0 ? 1 : (adv < 0.0 ? -1 : 0);
    if (sign == 0) return;
    const double alpha = oncapo_alpha(table.action_probs(s)(a), sign, cfg, s, a);
    table.theta(s, a) += alpha * sign;
    table.count_updates(1);
}

void oncapo_fixed_step(SoftmaxTable& table, const TabularMdp& mdp, double eta,
                       Xoshiro256pp& rng) {
    if (eta < 0.0) throw std::invalid_argument("oncapo_fixed_step: eta must be non-negative");
    const ValueProfile profile = policy_eval(mdp, table.probs());
    const int s = sample_onpolicy_state(mdp, profile.visitation, rng);
    const int a = sample_index(table.action_probs(s), rng);

    const double adv = profile.adv(s, a);
    const int sign = adv > 0.0 ? 1 : (adv < 0.0 ? -1 : 0);
    table.theta(s, a) += eta * sign;
    table.count_updates(1);
}

namespace {

Eigen::VectorXd softmax_vec(const Eigen::VectorXd& theta) {
    Eigen::VectorXd e = (theta.array() - theta.maxCoeff()).exp();
    return e / e.sum();
}

}  // namespace

void spg_step(Eigen::VectorXd& theta, const Eigen::VectorXd& arm_rewards, double eta,
              Xoshiro256pp& rng) {
    if (theta.size() < 2) throw std::invalid_argument("spg_step: need at least 2 arms");
    if (!(eta > 0.0)) throw std::invalid_argument("spg_step: eta must be positive");
    const Eigen::VectorXd pi = softmax_vec(theta);
    const int a = sample_index(pi, rng);
    for (int ap = 0; ap < theta.size(); ++ap)
        theta(ap) += eta * ((ap == a ? 1.0 : 0.0) - pi(ap)) * arm_rewards(a);
}

void is_spg_step(Eigen::VectorXd& theta, const Eigen::VectorXd& arm_rewards, double eta,
                 Xoshiro256pp& rng) {
    if (theta.size() < 2) throw std::invalid_argument("is_spg_step: need at least 2 arms");
    if (!(eta > 0.0)) throw std::invalid_argument("is_spg_step: eta must be positive");
    const Eigen::VectorXd pi = softmax_vec(theta);
    const int a = sample_index(pi, rng);
    // rhat(a') = I[a'=a] r(a)/pi(a), so pi . rhat = r(a); the sampled arm
    // moves by eta r(a) (1 - pi(a)) and every other arm by -eta pi(a') r(a).
    for (int ap = 0; ap < theta.size(); ++ap) {
        const double rhat = (ap == a) ? arm_rewards(a) / pi(a) : 0.0;
        theta(ap) += eta * pi(ap) * (rhat - arm_rewards(a));
    }
}

void offpac_step(SoftmaxTable& table, const TabularMdp& mdp, const Eigen::MatrixXd& behavior,
                 const Eigen::MatrixXd& q_exact, double eta, Xoshiro256pp& rng) {
    const Eigen::VectorXd d_behavior = visitation(mdp, behavior, mdp.start_dist);
    const int s = sample_index(d_behavior, rng);
    const int a = sample_index(behavior.row(s), rng);
    if (!(behavior(s, a) > 0.0))
        throw std::invalid_argument("offpac_step: sampled action has zero behavior probability");

    const Eigen::VectorXd pi_s = table.action_probs(s);
    const double ratio = pi_s(a) / behavior(s, a);
    // softmax log-gradient at (s,a'): I[a'=a] - pi(a'|s)
    for (int ap = 0; ap < mdp.n_actions; ++ap)
        table.theta(s, ap) +=
            eta * ratio * q_exact(s, a) * ((ap == a ? 1.0 : 0.0) - pi_s(ap));
    table.count_updates(1);
}

BanditStudyResult run_bandit_study(BanditAlgo algo, const std::vector<double>& arm_rewards,
                                   const std::vector<double>& theta0, int n_seeds, long n_iters,
                                   const BanditStudyConfig& cfg) {
    if (n_seeds < 1) throw std::invalid_argument("run_bandit_study: need n_seeds >= 1");
    const int k = static_cast<int>(arm_rewards.size());
    if (k < 2) throw std::invalid_argument("run_bandit_study: need at least 2 arms");
    if (!theta0.empty() && static_cast<int>(theta0.size()) != k)
        throw std::invalid_argument("run_bandit_study: theta0 size mismatch");

    const TabularMdp bandit = make_bandit(arm_rewards);
    int best_arm = 0;
    for (int a = 1; a < k; ++a)
        if (arm_rewards[a] > arm_rewards[best_arm]) best_arm = a;

    const Eigen::VectorXd rewards =
        Eigen::Map<const Eigen::VectorXd>(arm_rewards.data(), k);
    Eigen::MatrixXd theta_init = Eigen::MatrixXd::Zero(2, k);
    if (!theta0.empty())
        theta_init.row(0) = Eigen::Map<const Eigen::VectorXd>(theta0.data(), k).transpose();

    BanditStudyResult result;
    result.outcomes.reserve(static_cast<std::size_t>(n_seeds));
    std::vector<double> sum(static_cast<std::size_t>(n_iters) + 1, 0.0);
    std::vector<double> sum_sq(static_cast<std::size_t>(n_iters) + 1, 0.0);

    for (int i = 0; i < n_seeds; ++i) {
        Xoshiro256pp rng = Xoshiro256pp::stream(cfg.base_seed, static_cast<std::uint64_t>(i));
        SoftmaxTable table(theta_init);
        Eigen::VectorXd theta_vec = theta_init.row(0).transpose();
        OnCapoConfig oncfg(cfg.beta, cfg.zeta, 2, k);

        auto pi_star = [&]() {
            if (algo == BanditAlgo::spg || algo == BanditAlgo::is_spg)
                return softmax_vec(theta_vec)(best_arm);
            return table.action_probs(0)(best_arm);
        };

        for (long t = 0; t <= n_iters; ++t) {
            const double p = pi_star();
            sum[static_cast<std::size_t>(t)] += p;
            sum_sq[static_cast<std::size_t>(t)] += p * p;
            if (t == n_iters) break;

            switch (algo) {
                case BanditAlgo::oncapo:
                    oncapo_step(table, bandit, oncfg, rng);
                    break;
                case BanditAlgo::oncapo_fixed:
                    oncapo_fixed_step(table, bandit, cfg.eta, rng);
                    break;
                case BanditAlgo::offcapo:
                case BanditAlgo::offcapo_fixed: {
                    // coordinate chosen uniformly at random, independent of pi
                    const ValueProfile profile = policy_eval(bandit, table.probs());
                    const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
                    const double adv = profile.adv(0, a);
                    const int sign = adv > 0.0 ? 1 : (adv < 0.0 ? -1 : 0);
                    if (sign != 0) {
                        const double alpha =
                            algo == BanditAlgo::offcapo
                                ? capo_alpha(table.action_probs(0)(a), cfg.clip)
                                : cfg.eta;
                        table.theta(0, a) += alpha * sign;
                        table.count_updates(1);
                    }
                    break;
                }
                case BanditAlgo::spg:
                    spg_step(theta_vec, rewards, cfg.eta, rng);
                    break;
                case BanditAlgo::is_spg:
                    is_spg_step(theta_vec, rewards, cfg.eta, rng);
                    break;
            }
        }

        const Eigen::VectorXd final_pi = (algo == BanditAlgo::spg || algo == BanditAlgo::is_spg)
                                             ? softmax_vec(theta_vec)
                                             : table.action_probs(0);
        BanditRunOutcome outcome;
        outcome.seed = static_cast<std::uint64_t>(i);
        outcome.final_pi_star = final_pi(best_arm);
        outcome.converged = final_pi(best_arm) > cfg.converged_threshold;
        for (int a = 0; a < k; ++a)
            if (a != best_arm && final_pi(a) > cfg.stuck_threshold) outcome.stuck = true;
        outcome.iterations = n_iters;
        result.outcomes.push_back(outcome);
    }

    result.mean_pi_star.resize(sum.size());
    result.std_pi_star.resize(sum.size());
    for (std::size_t t = 0; t < sum.size(); ++t) {
        const double mean = sum[t] / n_seeds;
        result.mean_pi_star[t] = mean;
        const double var = std::max(0.0, sum_sq[t] / n_seeds - mean * mean);
        result.std_pi_star[t] = std::sqrt(var);
    }
    return result;
}

}  // namespace capo
