#include <capo/oracles.hpp>

#include <capo/capo.hpp>
#include <capo/exact.hpp>
#include <capo/mdp.hpp>
#include <capo/policy.hpp>
#include <capo/rng.hpp>

#include <cmath>
#include <limits>

namespace capo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd random_dist(int k, Xoshiro256pp& rng) {
    Eigen::VectorXd w(k);
    for (int i = 0; i < k; ++i) w(i) = -std::log1p(-rng.uniform());
    return w / w.sum();
}

Eigen::MatrixXd random_theta(int n_states, int n_actions, Xoshiro256pp& rng, double scale = 2.0) {
    Eigen::MatrixXd theta(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) theta(s, a) = (2.0 * rng.uniform() - 1.0) * scale;
    return theta;
}

// Point mass at state s.
Eigen::VectorXd delta_dist(int n, int s) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    d(s) = 1.0;
    return d;
}

OracleCheck weight_delta_vs_direct(Xoshiro256pp& rng) {
    OracleCheck check{"single_coordinate_weight_delta", true, 0.0, 1e-12, 1000};
    for (int i = 0; i < check.instances; ++i) {
        const int k = 2 + static_cast<int>(rng.below(5));
        const Eigen::VectorXd pi = random_dist(k, rng);
        const int a_m = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
        const int sign = rng.uniform() < 0.5 ? 1 : -1;

        SoftmaxTable table(pi.array().log().matrix().transpose());
        CoordinateBatch batch;
        batch.pairs.emplace_back(0, a_m);
        Eigen::MatrixXi signs = Eigen::MatrixXi::Zero(1, k);
        signs(0, a_m) = sign;
        capo_update(table, batch, signs, CapoAlphaRule{kInf});

        const Eigen::VectorXd direct = table.action_probs(0) - pi;
        const Eigen::VectorXd predicted = predicted_weight_delta(pi, a_m, sign).delta;
        check.max_err = std::max(check.max_err, (direct - predicted).lpNorm<Eigen::Infinity>());
    }
    check.pass = check.max_err < check.tol;
    return check;
}

OracleCheck batch_weights_vs_direct(Xoshiro256pp& rng) {
    OracleCheck check{"batch_update_weights", true, 0.0, 1e-12, 1000};
    for (int i = 0; i < check.instances; ++i) {
        const int k = 2 + static_cast<int>(rng.below(5));
        const Eigen::VectorXd pi = random_dist(k, rng);
        Eigen::VectorXi row_signs(k);
        Eigen::MatrixXi signs(1, k);
        for (int a = 0; a < k; ++a) {
            row_signs(a) = static_cast<int>(rng.below(3)) - 1;
            signs(0, a) = row_signs(a);
        }

        SoftmaxTable table(pi.array().log().matrix().transpose());
        CoordinateBatch batch;
        for (int a = 0; a < k; ++a) batch.pairs.emplace_back(0, a);
        capo_update(table, batch, signs, CapoAlphaRule{kInf});

        const Eigen::VectorXd direct = table.action_probs(0);
        const Eigen::VectorXd predicted = batch_capo_weights(pi, row_signs);
        check.max_err = std::max(check.max_err, (direct - predicted).lpNorm<Eigen::Infinity>());
    }
    check.pass = check.max_err < check.tol;
    return check;
}

struct SingleStepFixture {
    TabularMdp mdp;
    Eigen::MatrixXd pi_old;
    Eigen::MatrixXd pi_new;
    ValueProfile before;
    ValueProfile after;
    int s_m, a_m;
    double adv;
};

SingleStepFixture random_single_step(Xoshiro256pp& rng, double step, bool fixed_step) {
    SingleStepFixture fx;
    const int n_states = 3 + static_cast<int>(rng.below(3));
    const int n_actions = 2 + static_cast<int>(rng.below(2));
    fx.mdp = make_random_mdp(n_states, n_actions, 0.9, rng.next());

    SoftmaxTable table(random_theta(n_states, n_actions, rng));
    fx.pi_old = table.probs();
    fx.before = policy_eval(fx.mdp, fx.pi_old);

    fx.s_m = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_states)));
    fx.a_m = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_actions)));
    fx.adv = fx.before.adv(fx.s_m, fx.a_m);

    CoordinateBatch batch;
    batch.pairs.emplace_back(fx.s_m, fx.a_m);
    Eigen::MatrixXi signs = Eigen::MatrixXi::Zero(n_states, n_actions);
    signs(fx.s_m, fx.a_m) = fx.adv > 0.0 ? 1 : (fx.adv < 0.0 ? -1 : 0);
    if (fixed_step)
        capo_update(table, batch, signs, FixedEtaRule{step});
    else
        capo_update(table, batch, signs, CapoAlphaRule{kInf});

    fx.pi_new = table.probs();
    fx.after = policy_eval(fx.mdp, fx.pi_new);
    return fx;
}

OracleCheck fixed_step_improvement_vs_exact(Xoshiro256pp& rng) {
    OracleCheck check{"fixed_step_one_step_improvement", true, 0.0, 1e-9, 1000};
    for (int i = 0; i < check.instances; ++i) {
        const double eta = 0.1 + 1.9 * rng.uniform();
        const SingleStepFixture fx = random_single_step(rng, eta, true);
        if (fx.adv == 0.0) continue;
        const int s = static_cast<int>(rng.below(static_cast<std::uint64_t>(fx.mdp.n_states)));
        const double d_next =
            visitation(fx.mdp, fx.pi_new, delta_dist(fx.mdp.n_states, s))(fx.s_m);
        const double predicted = fixed_lr_one_step_improvement(
            d_next, fx.pi_old(fx.s_m, fx.a_m), fx.adv, eta, fx.mdp.gamma);
        const double actual = fx.after.v(s) - fx.before.v(s);
        check.max_err = std::max(check.max_err, std::abs(predicted - actual));
    }
    check.pass = check.max_err < check.tol;
    return check;
}

OracleCheck log_step_improvement_identity(Xoshiro256pp& rng) {
    OracleCheck check{"variable_step_one_step_improvement", true, 0.0, 1e-9, 1000};
    for (int i = 0; i < check.instances; ++i) {
        const SingleStepFixture fx = random_single_step(rng, 0.0, false);
        if (fx.adv == 0.0) continue;
        const int s = static_cast<int>(rng.below(static_cast<std::uint64_t>(fx.mdp.n_states)));
        const double d_next =
            visitation(fx.mdp, fx.pi_new, delta_dist(fx.mdp.n_states, s))(fx.s_m);
        const double p = fx.pi_old(fx.s_m, fx.a_m);
        const int sign = fx.adv > 0.0 ? 1 : -1;
        const Eigen::VectorXd pi_row = fx.pi_old.row(fx.s_m).transpose();
        const double w = std::abs(predicted_weight_delta(pi_row, fx.a_m, sign).delta(fx.a_m));
        const double predicted =
            d_next / (1.0 - fx.mdp.gamma) * w / (1.0 - p) * std::abs(fx.adv);
        const double actual = fx.after.v(s) - fx.before.v(s);
        check.max_err = std::max(check.max_err, std::abs(predicted - actual));
    }
    check.pass = check.max_err < check.tol;
    return check;
}

OracleCheck improvement_lower_bounds(Xoshiro256pp& rng) {
    OracleCheck check{"one_step_improvement_lower_bounds", true, 0.0, 1e-10, 1000};
    for (int i = 0; i < check.instances; ++i) {
        const SingleStepFixture fx = random_single_step(rng, 0.0, false);
        if (fx.adv == 0.0) continue;
        const int s = static_cast<int>(rng.below(static_cast<std::uint64_t>(fx.mdp.n_states)));
        const double d_next =
            visitation(fx.mdp, fx.pi_new, delta_dist(fx.mdp.n_states, s))(fx.s_m);
        const double bound = fx.adv > 0.0
                                 ? d_next / 2.0 * fx.adv * fx.adv
                                 : d_next * fx.pi_old(fx.s_m, fx.a_m) * fx.adv * fx.adv;
        const double actual = fx.after.v(s) - fx.before.v(s);
        check.max_err = std::max(check.max_err, bound - actual);  // positive = violation
    }
    check.pass = check.max_err < check.tol;
    return check;
}

OracleCheck perf_difference_identity(Xoshiro256pp& rng) {
    OracleCheck check{"performance_difference_identity", true, 0.0, 1e-9, 100};
    for (int i = 0; i < check.instances; ++i) {
        const TabularMdp mdp = make_random_mdp(3 + static_cast<int>(rng.below(3)),
                                               2 + static_cast<int>(rng.below(3)), 0.9,
                                               rng.next());
        const Eigen::MatrixXd pi_a = SoftmaxTable(random_theta(mdp.n_states, mdp.n_actions, rng)).probs();
        const Eigen::MatrixXd pi_b = SoftmaxTable(random_theta(mdp.n_states, mdp.n_actions, rng)).probs();
        const double lemma = perf_difference(mdp, pi_a, pi_b, mdp.start_dist);
        const double direct = mdp.start_dist.dot(policy_eval(mdp, pi_a).v) -
                              mdp.start_dist.dot(policy_eval(mdp, pi_b).v);
        check.max_err = std::max(check.max_err, std::abs(lemma - direct));
    }
    check.pass = check.max_err < check.tol;
    return check;
}

OracleCheck sum_pi_adv_zero(Xoshiro256pp& rng) {
    OracleCheck check{"policy_weighted_advantage_is_zero", true, 0.0, 1e-10, 100};
    for (int i = 0; i < check.instances; ++i) {
        const TabularMdp mdp = make_random_mdp(3 + static_cast<int>(rng.below(3)),
                                               2 + static_cast<int>(rng.below(3)), 0.9,
                                               rng.next());
        const Eigen::MatrixXd pi = SoftmaxTable(random_theta(mdp.n_states, mdp.n_actions, rng)).probs();
        const ValueProfile profile = policy_eval(mdp, pi);
        const double err =
            (pi.array() * profile.adv.array()).rowwise().sum().abs().maxCoeff();
        check.max_err = std::max(check.max_err, err);
    }
    check.pass = check.max_err < check.tol;
    return check;
}

OracleCheck advantage_bound(Xoshiro256pp& rng) {
    OracleCheck check{"advantage_magnitude_bound", true, 0.0, 1e-10, 100};
    for (int i = 0; i < check.instances; ++i) {
        const TabularMdp mdp = make_random_mdp(3 + static_cast<int>(rng.below(3)),
                                               2 + static_cast<int>(rng.below(3)), 0.9,
                                               rng.next());
        const Eigen::MatrixXd pi = SoftmaxTable(random_theta(mdp.n_states, mdp.n_actions, rng)).probs();
        const ValueProfile profile = policy_eval(mdp, pi);
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a) {
                const double cap = (1.0 - pi(s, a)) / (1.0 - mdp.gamma);
                check.max_err = std::max(check.max_err, std::abs(profile.adv(s, a)) - cap);
            }
    }
    check.pass = check.max_err < check.tol;
    return check;
}

OracleCheck visitation_lower_bound(Xoshiro256pp& rng) {
    OracleCheck check{"visitation_lower_bound", true, 0.0, 1e-10, 100};
    for (int i = 0; i < check.instances; ++i) {
        const TabularMdp mdp = make_random_mdp(3 + static_cast<int>(rng.below(3)),
                                               2 + static_cast<int>(rng.below(3)), 0.9,
                                               rng.next());
        const Eigen::MatrixXd pi = SoftmaxTable(random_theta(mdp.n_states, mdp.n_actions, rng)).probs();
        const Eigen::VectorXd d = visitation(mdp, pi, mdp.start_dist);
        const Eigen::VectorXd floor = (1.0 - mdp.gamma) * mdp.start_dist;
        check.max_err = std::max(check.max_err, (floor - d).maxCoeff());
    }
    check.pass = check.max_err < check.tol;
    return check;
}

}  // namespace

std::vector<OracleCheck> run_oracle_checks(std::uint64_t seed) {
    Xoshiro256pp rng = Xoshiro256pp::stream(seed, 77);
    std::vector<OracleCheck> checks;
    checks.push_back(weight_delta_vs_direct(rng));
    checks.push_back(batch_weights_vs_direct(rng));
    checks.push_back(fixed_step_improvement_vs_exact(rng));
    checks.push_back(log_step_improvement_identity(rng));
    checks.push_back(improvement_lower_bounds(rng));
    checks.push_back(perf_difference_identity(rng));
    checks.push_back(sum_pi_adv_zero(rng));
    checks.push_back(advantage_bound(rng));
    checks.push_back(visitation_lower_bound(rng));
    return checks;
}

}  // namespace capo
