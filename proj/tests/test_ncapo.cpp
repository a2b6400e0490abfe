#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <capo/exact.hpp>
#include <capo/mdp.hpp>
#include <capo/ncapo.hpp>

#include <cmath>
#include <cstdio>

using namespace capo;

namespace {

// Flattened view over all parameters for finite differencing.
std::vector<double*> parameter_refs(MlpPolicy& net) {
    std::vector<double*> refs;
    for (Eigen::Index i = 0; i < net.w1.size(); ++i) refs.push_back(net.w1.data() + i);
    for (Eigen::Index i = 0; i < net.b1.size(); ++i) refs.push_back(net.b1.data() + i);
    for (Eigen::Index i = 0; i < net.w2.size(); ++i) refs.push_back(net.w2.data() + i);
    for (Eigen::Index i = 0; i < net.b2.size(); ++i) refs.push_back(net.b2.data() + i);
    return refs;
}

std::vector<double> gradient_values(const MlpGrad& g) {
    std::vector<double> values;
    for (Eigen::Index i = 0; i < g.w1.size(); ++i) values.push_back(g.w1.data()[i]);
    for (Eigen::Index i = 0; i < g.b1.size(); ++i) values.push_back(g.b1.data()[i]);
    for (Eigen::Index i = 0; i < g.w2.size(); ++i) values.push_back(g.w2.data()[i]);
    for (Eigen::Index i = 0; i < g.b2.size(); ++i) values.push_back(g.b2.data()[i]);
    return values;
}

NcapoTarget random_target(const MlpPolicy& net, int n_states, Xoshiro256pp& rng) {
    std::vector<int> states;
    for (int s = 0; s < n_states; ++s) states.push_back(s);
    Eigen::MatrixXd f_rows(n_states, net.n_actions);
    for (int s = 0; s < n_states; ++s) f_rows.row(s) = net.logits(s).transpose();

    CoordinateBatch batch;
    Eigen::MatrixXi signs = Eigen::MatrixXi::Zero(n_states, net.n_actions);
    for (int s = 0; s < n_states; ++s) {
        const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(net.n_actions)));
        batch.pairs.emplace_back(s, a);
        signs(s, a) = rng.uniform() < 0.5 ? 1 : -1;
    }
    return ncapo_target(states, f_rows, batch, signs, 50.0);
}

}  // namespace

TEST_CASE("network forward pass produces softmax action distributions") {
    Xoshiro256pp rng(1);
    const MlpPolicy net = MlpPolicy::init(5, 16, 3, rng);
    for (int s = 0; s < 5; ++s) {
        const Eigen::VectorXd pi = net.action_probs(s);
        CHECK(pi.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(pi.minCoeff() > 0.0);
    }
    const Eigen::MatrixXd matrix = net.policy_matrix(5);
    CHECK(matrix.rows() == 5);
    CHECK(matrix.cols() == 3);
}

TEST_CASE("initialization is deterministic per seed") {
    Xoshiro256pp a(7), b(7), c(8);
    const MlpPolicy na = MlpPolicy::init(4, 8, 2, a);
    const MlpPolicy nb = MlpPolicy::init(4, 8, 2, b);
    const MlpPolicy nc = MlpPolicy::init(4, 8, 2, c);
    CHECK(na.w1 == nb.w1);
    CHECK(na.w2 == nb.w2);
    CHECK(na.w1 != nc.w1);
}

TEST_CASE("target construction shifts exactly the batch coordinates") {
    Xoshiro256pp rng(2);
    const MlpPolicy net = MlpPolicy::init(4, 8, 3, rng);
    const std::vector<int> states = {1, 2};
    Eigen::MatrixXd f_rows(2, 3);
    f_rows.row(0) = net.logits(1).transpose();
    f_rows.row(1) = net.logits(2).transpose();

    CoordinateBatch batch;
    batch.pairs.emplace_back(1, 0);
    Eigen::MatrixXi signs = Eigen::MatrixXi::Zero(4, 3);
    signs(1, 0) = 1;
    const NcapoTarget target = ncapo_target(states, f_rows, batch, signs, 50.0);

    // row 0 belongs to state 1: only its batch coordinate moves
    CHECK(target.target_logits(0, 0) > f_rows(0, 0));
    CHECK(target.target_logits(0, 1) == f_rows(0, 1));
    CHECK(target.target_logits(0, 2) == f_rows(0, 2));
    CHECK(target.target_logits.row(1) == f_rows.row(1));

    // a positive shift with alpha = log(1/pi) lands at 1/(2 - pi)
    const double pi_before = net.action_probs(1)(0);
    CHECK(target.target_probs(0, 0) ==
          doctest::Approx(1.0 / (2.0 - pi_before)).epsilon(1e-12));

    // all-zero signs reproduce the current policy
    const NcapoTarget noop =
        ncapo_target(states, f_rows, batch, Eigen::MatrixXi::Zero(4, 3), 50.0);
    CHECK((noop.target_probs.row(0).transpose() - net.action_probs(1))
              .lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("two shifted pairs in one state combine through a joint softmax") {
    Xoshiro256pp rng(3);
    const MlpPolicy net = MlpPolicy::init(3, 8, 3, rng);
    const std::vector<int> states = {0};
    Eigen::MatrixXd f_rows(1, 3);
    f_rows.row(0) = net.logits(0).transpose();

    CoordinateBatch batch;
    batch.pairs.emplace_back(0, 0);
    batch.pairs.emplace_back(0, 2);
    Eigen::MatrixXi signs = Eigen::MatrixXi::Zero(3, 3);
    signs(0, 0) = 1;
    signs(0, 2) = -1;
    const NcapoTarget target = ncapo_target(states, f_rows, batch, signs, 50.0);

    // cross-check by direct exponentiation of both shifted logits
    const Eigen::VectorXd pi = net.action_probs(0);
    Eigen::VectorXd shifted = f_rows.row(0).transpose();
    shifted(0) += std::min(std::log(1.0 / pi(0)), 50.0);
    shifted(2) -= std::min(std::log(1.0 / pi(2)), 50.0);
    Eigen::VectorXd e = (shifted.array() - shifted.maxCoeff()).exp();
    e /= e.sum();
    CHECK((target.target_probs.row(0).transpose() - e).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("KL of identical distributions is zero with zero gradient") {
    Xoshiro256pp rng(4);
    const MlpPolicy net = MlpPolicy::init(4, 8, 3, rng);
    NcapoTarget target;
    target.states = {0, 1, 2, 3};
    target.target_logits.resize(4, 3);
    for (int s = 0; s < 4; ++s) target.target_logits.row(s) = net.logits(s).transpose();
    target.target_probs = net.policy_matrix(4);

    const auto [loss, grad] = kl_loss_and_grad(net, target);
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(grad.w1.lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(grad.w2.lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("KL against a hand-computed two-action case") {
    // pi = [0.5, 0.5], target = [0.75, 0.25]:
    // KL = 0.5 ln(0.5/0.75) + 0.5 ln(0.5/0.25)
    MlpPolicy net;
    net.input_dim = 1;
    net.hidden = 1;
    net.n_actions = 2;
    net.w1 = Eigen::MatrixXd::Zero(1, 1);
    net.b1 = Eigen::VectorXd::Zero(1);
    net.w2 = Eigen::MatrixXd::Zero(2, 1);
    net.b2 = Eigen::VectorXd::Zero(2);

    NcapoTarget target;
    target.states = {0};
    target.target_logits.resize(1, 2);
    target.target_logits << std::log(0.75), std::log(0.25);
    target.target_probs.resize(1, 2);
    target.target_probs << 0.75, 0.25;

    const auto [loss, grad] = kl_loss_and_grad(net, target);
    CHECK(loss == doctest::Approx(0.143841036225890).epsilon(1e-12));
}

TEST_CASE("analytic KL gradient matches central finite differences") {
    Xoshiro256pp rng(5);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const int n_states = 2 + static_cast<int>(rng.below(3));
        const int n_actions = 2 + static_cast<int>(rng.below(3));
        const int hidden = 4 + static_cast<int>(rng.below(5));
        MlpPolicy net = MlpPolicy::init(n_states, hidden, n_actions, rng);
        const NcapoTarget target = random_target(net, n_states, rng);

        const auto [loss, grad] = kl_loss_and_grad(net, target);
        const std::vector<double> analytic = gradient_values(grad);
        const std::vector<double*> params = parameter_refs(net);

        const double h = 1e-5;
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double saved = *params[i];
            *params[i] = saved + h;
            const double up = kl_loss_and_grad(net, target).first;
            *params[i] = saved - h;
            const double down = kl_loss_and_grad(net, target).first;
            *params[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            num += (fd - analytic[i]) * (fd - analytic[i]);
            den += fd * fd;
        }
        const double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
        worst = std::max(worst, rel);
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("reverse KL gradient also matches finite differences") {
    Xoshiro256pp rng(6);
    MlpPolicy net = MlpPolicy::init(3, 6, 3, rng);
    const NcapoTarget target = random_target(net, 3, rng);

    const auto [loss, grad] = kl_loss_and_grad(net, target, true);
    const std::vector<double> analytic = gradient_values(grad);
    const std::vector<double*> params = parameter_refs(net);
    const double h = 1e-5;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = *params[i];
        *params[i] = saved + h;
        const double up = kl_loss_and_grad(net, target, true).first;
        *params[i] = saved - h;
        const double down = kl_loss_and_grad(net, target, true).first;
        *params[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        num += (fd - analytic[i]) * (fd - analytic[i]);
        den += fd * fd;
    }
    CHECK(std::sqrt(num) / std::max(std::sqrt(den), 1e-12) < 1e-5);
}

TEST_CASE("gradient descent drives a single state onto its target") {
    // tabular-width network: repeated steps on one state's target converge
    Xoshiro256pp rng(8);
    const int n_states = 3, n_actions = 3;
    MlpPolicy net = MlpPolicy::init(n_states, n_states * n_actions, n_actions, rng);

    NcapoTarget target;
    target.states = {1};
    target.target_logits.resize(1, n_actions);
    target.target_logits << 0.5, -0.5, 0.1;
    Eigen::VectorXd e =
        (target.target_logits.row(0).array() - target.target_logits.row(0).maxCoeff())
            .exp()
            .matrix()
            .transpose();
    e /= e.sum();
    target.target_probs = e.transpose();

    double prev = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 10000; ++step) {
        const auto [loss, grad] = kl_loss_and_grad(net, target);
        CHECK(loss <= prev + 1e-12);  // monotone decrease at this step size
        prev = loss;
        net.w1 -= 0.5 * grad.w1;
        net.b1 -= 0.5 * grad.b1;
        net.w2 -= 0.5 * grad.w2;
        net.b2 -= 0.5 * grad.b2;
    }
    CHECK((net.action_probs(1) - target.target_probs.row(0).transpose())
              .lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("zero gradient steps leave the network unchanged") {
    const TabularMdp chain = make_chain(5);
    NcapoConfig cfg;
    cfg.hidden = 8;
    cfg.iters = 3;
    cfg.grad_steps = 0;
    const auto history = train_ncapo(chain, NcapoMode::exact_adv, cfg);
    REQUIRE(history.size() == 4);
    for (const auto& rec : history)
        CHECK(rec.v_mu == doctest::Approx(history.front().v_mu).epsilon(1e-12));
}

TEST_CASE("exact-advantage training improves a small chain") {
    const TabularMdp chain = make_chain(4, 0.1, 10.0, 0.9);
    NcapoConfig cfg;
    cfg.hidden = 32;
    cfg.iters = 120;
    cfg.grad_steps = 30;
    cfg.batch_size = 4;
    cfg.lr = 0.01;
    cfg.seed = 3;
    const auto history = train_ncapo(chain, NcapoMode::exact_adv, cfg);
    CHECK(history.back().v_mu > history.front().v_mu);
    CHECK(history.back().v_mu > 0.5 * optimal_values(chain).v_star(1));
}

TEST_CASE("network weights round-trip through the named-block format") {
    Xoshiro256pp rng(77);
    const MlpPolicy net = MlpPolicy::init(6, 12, 3, rng);
    const std::string path = "/tmp/capo_test_weights.csv";
    save_mlp_csv(path, net);
    const MlpPolicy loaded = load_mlp_csv(path);
    CHECK(loaded.w1 == net.w1);
    CHECK(loaded.b1 == net.b1);
    CHECK(loaded.w2 == net.w2);
    CHECK(loaded.b2 == net.b2);
    for (int s = 0; s < 6; ++s)
        CHECK((loaded.action_probs(s) - net.action_probs(s)).lpNorm<Eigen::Infinity>() == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("replay-retrace training runs and improves on a small chain") {
    const TabularMdp chain = make_chain(4, 0.1, 10.0, 0.9);
    NcapoConfig cfg;
    cfg.hidden = 32;
    cfg.iters = 80;
    cfg.grad_steps = 10;
    cfg.lr = 0.02;
    cfg.n_rollouts = 2;
    cfg.rollout_len = 8;
    cfg.buffer_capacity = 50;
    cfg.seed = 5;
    const auto history = train_ncapo(chain, NcapoMode::replay_retrace, cfg);
    REQUIRE(history.size() == 81);
    CHECK(history.back().v_mu > history.front().v_mu);
}
