#include <capo/mdp.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace capo {

namespace {

constexpr double kRowSumTol = 1e-12;

void check(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void validate(const TabularMdp& mdp) {
    check(mdp.n_states >= 1, "mdp: n_states must be positive");
    check(mdp.n_actions >= 1, "mdp: n_actions must be positive");
    check(mdp.gamma > 0.0 && mdp.gamma < 1.0, "mdp: gamma must lie strictly inside (0,1)");
    check(static_cast<int>(mdp.transition.size()) == mdp.n_actions,
          "mdp: one transition matrix per action required");
    check(mdp.reward.rows() == mdp.n_states && mdp.reward.cols() == mdp.n_actions,
          "mdp: reward table shape mismatch");
    check(mdp.start_dist.size() == mdp.n_states, "mdp: start_dist size mismatch");
    check(static_cast<int>(mdp.terminal.size()) == mdp.n_states,
          "mdp: terminal mask size mismatch");

    for (int a = 0; a < mdp.n_actions; ++a) {
        const auto& pa = mdp.transition[a];
        check(pa.rows() == mdp.n_states && pa.cols() == mdp.n_states,
              "mdp: transition matrix shape mismatch");
        for (int s = 0; s < mdp.n_states; ++s) {
            check(pa.row(s).minCoeff() >= 0.0, "mdp: negative transition probability");
            check(std::abs(pa.row(s).sum() - 1.0) <= kRowSumTol,
                  "mdp: transition row does not sum to 1");
        }
    }
    check(mdp.start_dist.minCoeff() >= 0.0, "mdp: negative start probability");
    check(std::abs(mdp.start_dist.sum() - 1.0) <= kRowSumTol,
          "mdp: start_dist does not sum to 1");
    check(!mdp.reward.hasNaN(), "mdp: reward table has NaN");

    for (int s = 0; s < mdp.n_states; ++s) {
        if (!mdp.terminal[s]) continue;
        for (int a = 0; a < mdp.n_actions; ++a) {
            check(mdp.transition[a](s, s) == 1.0, "mdp: terminal state must self-loop");
            check(mdp.reward(s, a) == 0.0, "mdp: terminal state must pay zero reward");
        }
    }
}

TabularMdp make_bandit(const std::vector<double>& arm_rewards, double gamma) {
    const int k = static_cast<int>(arm_rewards.size());
    if (k < 2) throw std::invalid_argument("make_bandit: need at least 2 arms");

    TabularMdp mdp;
    mdp.n_states = 2;  // 0 = decision state, 1 = sink
    mdp.n_actions = k;
    mdp.gamma = gamma;
    mdp.reward = Eigen::MatrixXd::Zero(2, k);
    mdp.start_dist = Eigen::VectorXd::Zero(2);
    mdp.start_dist(0) = 1.0;
    mdp.terminal = {false, true};
    mdp.transition.assign(k, Eigen::MatrixXd::Zero(2, 2));
    for (int a = 0; a < k; ++a) {
        mdp.transition[a](0, 1) = 1.0;
        mdp.transition[a](1, 1) = 1.0;
        mdp.reward(0, a) = arm_rewards[a];
    }
    return mdp;
}

TabularMdp make_chain(int n, double step_reward, double goal_reward, double gamma) {
    if (n < 3) throw std::invalid_argument("make_chain: need n >= 3");

    const int ns = n + 1;  // S0..Sn
    TabularMdp mdp;
    mdp.n_states = ns;
    mdp.n_actions = 2;
    mdp.gamma = gamma;
    mdp.reward = Eigen::MatrixXd::Zero(ns, 2);
    mdp.start_dist = Eigen::VectorXd::Zero(ns);
    mdp.start_dist(1) = 1.0;  // always start at S1
    mdp.terminal.assign(ns, false);
    mdp.terminal[0] = true;
    mdp.terminal[n] = true;
    mdp.transition.assign(2, Eigen::MatrixXd::Zero(ns, ns));

    for (int a = 0; a < 2; ++a) {
        mdp.transition[a](0, 0) = 1.0;
        mdp.transition[a](n, n) = 1.0;
    }
    for (int s = 1; s < n; ++s) {
        mdp.transition[kChainTerminate](s, 0) = 1.0;
        mdp.reward(s, kChainTerminate) = step_reward;
        mdp.transition[kChainRight](s, s + 1) = 1.0;
        mdp.reward(s, kChainRight) = (s == n - 1) ? goal_reward : 0.0;
    }
    return mdp;
}

TabularMdp make_random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed) {
    if (n_states < 2) throw std::invalid_argument("make_random_mdp: need n_states >= 2");
    if (n_actions < 2) throw std::invalid_argument("make_random_mdp: need n_actions >= 2");

    Xoshiro256pp rng(seed);
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.reward = Eigen::MatrixXd(n_states, n_actions);
    mdp.start_dist = Eigen::VectorXd::Constant(n_states, 1.0 / n_states);
    mdp.terminal.assign(n_states, false);
    mdp.transition.assign(n_actions, Eigen::MatrixXd::Zero(n_states, n_states));

    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            // exponential weights normalize to a Dirichlet(1,...,1) row
            Eigen::VectorXd w(n_states);
            for (int s2 = 0; s2 < n_states; ++s2) w(s2) = -std::log1p(-rng.uniform());
            const double total = w.sum();
            if (total <= 0.0) {
                mdp.transition[a].row(s).setConstant(1.0 / n_states);
            } else {
                mdp.transition[a].row(s) = (w / total).transpose();
            }
            mdp.reward(s, a) = rng.uniform();
        }
    }
    return mdp;
}

Rollout sample_rollout(const TabularMdp& mdp, const Eigen::MatrixXd& policy,
                       int start_state, int max_len, Xoshiro256pp& rng) {
    if (start_state < 0 || start_state >= mdp.n_states)
        throw std::invalid_argument("sample_rollout: start_state out of range");
    if (mdp.is_terminal(start_state))
        throw std::invalid_argument("sample_rollout: start_state is terminal");
    if (max_len < 1) throw std::invalid_argument("sample_rollout: max_len must be >= 1");

    Rollout out;
    out.steps.reserve(static_cast<std::size_t>(max_len));
    int s = start_state;
    for (int t = 0; t < max_len; ++t) {
        const Eigen::VectorXd row = policy.row(s).transpose();
        if (std::abs(row.sum() - 1.0) > 1e-9 || row.minCoeff() < 0.0)
            throw std::invalid_argument("sample_rollout: policy row is not a distribution");
        const int a = sample_index(row, rng);
        const int s2 = sample_index(mdp.transition[a].row(s), rng);
        out.steps.push_back({s, a, mdp.reward(s, a), s2, row(a)});
        s = s2;
        if (mdp.is_terminal(s)) break;
    }
    return out;
}

}  // namespace capo
