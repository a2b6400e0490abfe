#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <capo/exact.hpp>
#include <capo/mdp.hpp>

#include <cmath>

using namespace capo;

namespace {

Eigen::MatrixXd uniform_policy(const TabularMdp& mdp) {
    return Eigen::MatrixXd::Constant(mdp.n_states, mdp.n_actions, 1.0 / mdp.n_actions);
}

// Monte Carlo return from `state`, horizon chosen so gamma^t < 1e-6.
double monte_carlo_value(const TabularMdp& mdp, const Eigen::MatrixXd& policy, int state,
                         int episodes, Xoshiro256pp& rng, double* standard_error) {
    const int horizon =
        static_cast<int>(std::ceil(std::log(1e-6) / std::log(mdp.gamma)));
    double sum = 0.0, sum_sq = 0.0;
    for (int e = 0; e < episodes; ++e) {
        const Rollout rollout = sample_rollout(mdp, policy, state, horizon, rng);
        double ret = 0.0, discount = 1.0;
        for (const Transition& tr : rollout.steps) {
            ret += discount * tr.reward;
            discount *= mdp.gamma;
        }
        sum += ret;
        sum_sq += ret * ret;
    }
    const double mean = sum / episodes;
    const double var = std::max(0.0, sum_sq / episodes - mean * mean);
    *standard_error = std::sqrt(var / episodes);
    return mean;
}

}  // namespace

TEST_CASE("bandit construction and uniform values") {
    const TabularMdp b1 = make_bandit({1.0, 0.99, -1.0});
    validate(b1);
    const ValueProfile p1 = policy_eval(b1, uniform_policy(b1));
    CHECK(p1.v(0) == doctest::Approx(0.33).epsilon(1e-12));

    const TabularMdp b2 = make_bandit({10.0, 9.9, 9.9, 0.0});
    validate(b2);
    const ValueProfile p2 = policy_eval(b2, uniform_policy(b2));
    CHECK(p2.v(0) == doctest::Approx(7.45).epsilon(1e-12));

    // equal arms are worth the same under every policy
    const TabularMdp b3 = make_bandit({2.5, 2.5});
    Eigen::MatrixXd skew(2, 2);
    skew << 0.9, 0.1, 0.5, 0.5;
    CHECK(policy_eval(b3, skew).v(0) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK_THROWS_AS(make_bandit({1.0}), std::invalid_argument);
}

TEST_CASE("bandit value is the reward dot product for any gamma") {
    for (double gamma : {0.5, 0.9, 0.99}) {
        const TabularMdp b = make_bandit({1.0, 0.3, -0.2}, gamma);
        Eigen::MatrixXd pi(2, 3);
        pi << 0.2, 0.5, 0.3, 1.0 / 3, 1.0 / 3, 1.0 / 3;
        const double expected = 0.2 * 1.0 + 0.5 * 0.3 + 0.3 * -0.2;
        CHECK(policy_eval(b, pi).v(0) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("chain construction, optimal and terminate-always values") {
    const TabularMdp chain = make_chain(10);
    validate(chain);
    CHECK(chain.n_states == 11);

    const OptimalValues best = optimal_values(chain, 1e-10);
    CHECK(best.v_star(1) == doctest::Approx(std::pow(0.99, 8) * 100.0).epsilon(1e-9));

    Eigen::MatrixXd terminate = Eigen::MatrixXd::Zero(11, 2);
    terminate.col(kChainTerminate).setOnes();
    CHECK(policy_eval(chain, terminate).v(1) == doctest::Approx(0.1).epsilon(1e-12));

    const TabularMdp small = make_chain(3, 0.1, 100.0, 0.5);
    CHECK(optimal_values(small, 1e-10).v_star(1) == doctest::Approx(50.0).epsilon(1e-9));

    CHECK_THROWS_AS(make_chain(2), std::invalid_argument);
}

TEST_CASE("deterministic RIGHT policy walks the chain to the goal") {
    const TabularMdp chain = make_chain(10);
    Eigen::MatrixXd right = Eigen::MatrixXd::Zero(11, 2);
    right.col(kChainRight).setOnes();
    Xoshiro256pp rng(3);
    const Rollout rollout = sample_rollout(chain, right, 1, 100, rng);
    REQUIRE(rollout.length() == 9);
    for (int t = 0; t < 8; ++t) CHECK(rollout.steps[t].reward == 0.0);
    CHECK(rollout.steps[8].reward == 100.0);
    CHECK(rollout.steps[8].next_state == 10);
}

TEST_CASE("random MDPs are deterministic per seed and always valid") {
    const TabularMdp a = make_random_mdp(3, 2, 0.9, 1);
    const TabularMdp b = make_random_mdp(3, 2, 0.9, 1);
    for (int act = 0; act < 2; ++act) CHECK(a.transition[act] == b.transition[act]);
    CHECK(a.reward == b.reward);

    const TabularMdp c = make_random_mdp(3, 2, 0.9, 2);
    CHECK(a.reward != c.reward);

    for (std::uint64_t seed = 0; seed < 20; ++seed)
        validate(make_random_mdp(2 + seed % 5, 2 + seed % 3, 0.9, seed));

    CHECK_THROWS_AS(make_random_mdp(1, 2, 0.9, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_random_mdp(2, 1, 0.9, 0), std::invalid_argument);
}

TEST_CASE("rollouts stop at terminals and respect max_len") {
    const TabularMdp chain = make_chain(5);
    Xoshiro256pp rng(17);
    const Eigen::MatrixXd pi = uniform_policy(chain);

    for (int i = 0; i < 200; ++i) {
        const Rollout rollout = sample_rollout(chain, pi, 1, 50, rng);
        REQUIRE(rollout.length() >= 1);
        for (int t = 0; t + 1 < rollout.length(); ++t) {
            CHECK_FALSE(chain.is_terminal(rollout.steps[t].next_state));
            CHECK(rollout.steps[t].next_state == rollout.steps[t + 1].state);
        }
        for (const Transition& tr : rollout.steps) CHECK(tr.behavior_prob > 0.0);
    }

    const Rollout one = sample_rollout(chain, pi, 1, 1, rng);
    CHECK(one.length() == 1);

    CHECK_THROWS_AS(sample_rollout(chain, pi, 0, 10, rng), std::invalid_argument);

    Eigen::MatrixXd bad = pi;
    bad(1, 0) = 0.9;  // row no longer sums to 1
    CHECK_THROWS_AS(sample_rollout(chain, bad, 1, 10, rng), std::invalid_argument);
}

TEST_CASE("Monte Carlo bandit mean matches the dot product within 3 SE") {
    const TabularMdp bandit = make_bandit({1.0, 0.99, -1.0});
    const Eigen::MatrixXd pi = uniform_policy(bandit);
    Xoshiro256pp rng(23);
    double se = 0.0;
    const double mc = monte_carlo_value(bandit, pi, 0, 100000, rng, &se);
    CHECK(std::abs(mc - 0.33) < 3 * se);
}

TEST_CASE("Monte Carlo return matches exact policy evaluation on a random MDP") {
    const TabularMdp mdp = make_random_mdp(3, 2, 0.9, 7);
    const Eigen::MatrixXd pi = uniform_policy(mdp);
    const ValueProfile profile = policy_eval(mdp, pi);
    Xoshiro256pp rng(29);
    double se = 0.0;
    const double mc = monte_carlo_value(mdp, pi, 0, 100000, rng, &se);
    CHECK(std::abs(mc - profile.v(0)) < 3 * se + 1e-4);  // 1e-4 horizon truncation slack
}

TEST_CASE("Monte Carlo under the greedy policy reproduces the optimal value") {
    const TabularMdp mdp = make_random_mdp(2, 2, 0.9, 7);
    const OptimalValues best = optimal_values(mdp, 1e-10);
    Xoshiro256pp rng(31);
    double se = 0.0;
    const double mc = monte_carlo_value(mdp, best.greedy, 0, 100000, rng, &se);
    CHECK(std::abs(mc - best.v_star(0)) < 3 * se + 1e-4);
}

TEST_CASE("validate rejects broken structures") {
    TabularMdp mdp = make_bandit({1.0, 0.0});
    mdp.gamma = 1.0;
    CHECK_THROWS_AS(validate(mdp), std::invalid_argument);

    mdp = make_bandit({1.0, 0.0});
    mdp.transition[0](0, 0) = 0.5;  // row sums to 1.5
    CHECK_THROWS_AS(validate(mdp), std::invalid_argument);

    mdp = make_bandit({1.0, 0.0});
    mdp.reward(1, 0) = 1.0;  // terminal reward must stay zero
    CHECK_THROWS_AS(validate(mdp), std::invalid_argument);

    mdp = make_bandit({1.0, 0.0});
    mdp.start_dist(0) = 0.5;
    CHECK_THROWS_AS(validate(mdp), std::invalid_argument);
}
