#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <capo/critic.hpp>
#include <capo/exact.hpp>
#include <capo/mdp.hpp>

#include <cmath>

using namespace capo;

namespace {

Eigen::MatrixXd uniform_policy(const TabularMdp& mdp) {
    return Eigen::MatrixXd::Constant(mdp.n_states, mdp.n_actions, 1.0 / mdp.n_actions);
}

}  // namespace

TEST_CASE("buffer evicts oldest first and keeps insertion order") {
    ReplayBuffer buffer(3);
    for (int i = 0; i < 5; ++i) {
        Rollout r;
        r.steps.push_back({i, 0, 0.0, i, 1.0});
        buffer.push(std::move(r));
    }
    REQUIRE(buffer.size() == 3);
    CHECK(buffer.rollouts()[0].steps[0].state == 2);
    CHECK(buffer.rollouts()[1].steps[0].state == 3);
    CHECK(buffer.rollouts()[2].steps[0].state == 4);
    CHECK_THROWS_AS(ReplayBuffer(0), std::invalid_argument);
    Rollout empty;
    CHECK_THROWS_AS(buffer.push(std::move(empty)), std::invalid_argument);
}

TEST_CASE("one-step on-policy retrace target is the bootstrapped return") {
    const TabularMdp bandit = make_bandit({1.0, 0.5});
    const Eigen::MatrixXd pi = uniform_policy(bandit);
    QEstimate q(2, 2);
    q.q << 0.3, -0.2, 0.0, 0.0;

    Rollout rollout;
    rollout.steps.push_back({0, 0, 1.0, 1, 0.5});  // lands in the sink
    const auto targets = retrace_targets(rollout, q, pi, bandit.gamma, bandit.terminal);
    REQUIRE(targets.size() == 1);
    CHECK(targets[0] == doctest::Approx(1.0).epsilon(1e-14));  // terminal bootstrap is 0
}

TEST_CASE("exact q on a deterministic environment reproduces itself") {
    const TabularMdp chain = make_chain(6);
    Eigen::MatrixXd target(chain.n_states, 2);
    target.setConstant(0.5);
    const ValueProfile profile = policy_eval(chain, target);

    QEstimate q(chain.n_states, 2);
    q.q = profile.q;

    Xoshiro256pp rng(7);
    const Eigen::MatrixXd behavior = uniform_policy(chain);
    for (int i = 0; i < 50; ++i) {
        const Rollout rollout = sample_rollout(chain, behavior, 1, 12, rng);
        const auto targets = retrace_targets(rollout, q, target, chain.gamma, chain.terminal);
        for (int t = 0; t < rollout.length(); ++t) {
            const Transition& tr = rollout.steps[t];
            CHECK(targets[t] == doctest::Approx(q.q(tr.state, tr.action)).epsilon(1e-10));
        }
    }
}

TEST_CASE("lambda = 0 reduces to the one-step bootstrapped target") {
    const TabularMdp mdp = make_random_mdp(3, 2, 0.9, 4);
    const Eigen::MatrixXd pi = uniform_policy(mdp);
    QEstimate q(3, 2, 0.1, 0.0);  // lambda = 0
    q.q << 0.4, -0.1, 0.2, 0.9, -0.5, 0.3;

    Xoshiro256pp rng(5);
    const Rollout rollout = sample_rollout(mdp, pi, 0, 6, rng);
    const auto targets = retrace_targets(rollout, q, pi, mdp.gamma, mdp.terminal);
    for (int t = 0; t < rollout.length(); ++t) {
        const Transition& tr = rollout.steps[t];
        const double expected =
            tr.reward + mdp.gamma * pi.row(tr.next_state).dot(q.q.row(tr.next_state));
        CHECK(targets[t] == doctest::Approx(expected).epsilon(1e-13));
    }
}

TEST_CASE("zero behavior probability is a contract violation") {
    const TabularMdp bandit = make_bandit({1.0, 0.5});
    QEstimate q(2, 2);
    Rollout rollout;
    rollout.steps.push_back({0, 0, 1.0, 1, 0.0});
    CHECK_THROWS_AS(retrace_targets(rollout, q, uniform_policy(bandit), 0.9, bandit.terminal),
                    std::invalid_argument);
}

TEST_CASE("fit_q contracts a repeated one-step rollout to its fixed point") {
    const TabularMdp bandit = make_bandit({0.8, 0.2});
    const Eigen::MatrixXd pi = uniform_policy(bandit);
    ReplayBuffer buffer(4);
    Rollout rollout;
    rollout.steps.push_back({0, 0, 0.8, 1, 0.5});
    buffer.push(std::move(rollout));

    QEstimate q(2, 2);
    q.q(0, 0) = 5.0;  // far from the fixed point
    fit_q(buffer, q, pi, bandit.gamma, bandit.terminal, 30, 0.5);
    // target is r with a terminal bootstrap; error contracts by (1 - kappa)
    CHECK(q.q(0, 0) == doctest::Approx(0.8).epsilon(1e-8));

    // kappa = 0 leaves q untouched
    QEstimate frozen(2, 2);
    frozen.q(0, 0) = 5.0;
    fit_q(buffer, frozen, pi, bandit.gamma, bandit.terminal, 10, 0.0);
    CHECK(frozen.q(0, 0) == 5.0);

    ReplayBuffer empty(2);
    CHECK_THROWS_AS(fit_q(empty, q, pi, 0.9, bandit.terminal, 1, 0.1),
                    std::invalid_argument);
}

TEST_CASE("retrace-fitted q approaches the exact action values off-policy") {
    const TabularMdp mdp = make_random_mdp(3, 2, 0.8, 12);
    const Eigen::MatrixXd behavior = uniform_policy(mdp);
    Eigen::MatrixXd target(3, 2);
    target << 0.7, 0.3, 0.2, 0.8, 0.6, 0.4;
    const ValueProfile profile = policy_eval(mdp, target);

    Xoshiro256pp rng(1);
    ReplayBuffer buffer(500);
    for (int i = 0; i < 500; ++i)
        buffer.push(sample_rollout(mdp, behavior, static_cast<int>(rng.below(3)), 20, rng));

    QEstimate q(3, 2, 0.1, 1.0);
    fit_q(buffer, q, target, mdp.gamma, mdp.terminal, 200, 0.1);
    CHECK((q.q - profile.q).lpNorm<Eigen::Infinity>() < 0.05);
}

TEST_CASE("signs from q: constant rows, exact q, and a hand case") {
    const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(2, 2, 0.5);

    Eigen::MatrixXd flat(2, 2);
    flat << 0.7, 0.7, -0.1, -0.1;
    CHECK(advantage_signs_from_q(flat, uniform).isZero());

    Eigen::MatrixXd q(1, 2);
    q << 1.0, 0.0;
    const Eigen::MatrixXi signs =
        advantage_signs_from_q(q, Eigen::MatrixXd::Constant(1, 2, 0.5));
    CHECK(signs(0, 0) == 1);
    CHECK(signs(0, 1) == -1);

    const TabularMdp mdp = make_random_mdp(4, 3, 0.9, 8);
    const Eigen::MatrixXd pi = uniform_policy(mdp);
    const ValueProfile profile = policy_eval(mdp, pi);
    const Eigen::MatrixXi from_q = advantage_signs_from_q(profile.q, pi);
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 3; ++a) {
            const int expected =
                profile.adv(s, a) > 1e-8 ? 1 : (profile.adv(s, a) < -1e-8 ? -1 : 0);
            CHECK(from_q(s, a) == expected);
        }
}

TEST_CASE("policy-weighted advantage from q vanishes by construction") {
    Xoshiro256pp rng(9);
    for (int i = 0; i < 50; ++i) {
        Eigen::MatrixXd q(3, 3);
        for (int s = 0; s < 3; ++s)
            for (int a = 0; a < 3; ++a) q(s, a) = 10.0 * rng.uniform() - 5.0;
        Eigen::MatrixXd pi(3, 3);
        for (int s = 0; s < 3; ++s) {
            Eigen::VectorXd w(3);
            for (int a = 0; a < 3; ++a) w(a) = -std::log1p(-rng.uniform());
            pi.row(s) = (w / w.sum()).transpose();
        }
        for (int s = 0; s < 3; ++s) {
            const double v = pi.row(s).dot(q.row(s));
            double acc = 0.0;
            for (int a = 0; a < 3; ++a) acc += pi(s, a) * (q(s, a) - v);
            CHECK(std::abs(acc) < 1e-12);
        }
    }
}
