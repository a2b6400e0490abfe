#include <capo/exact.hpp>

#include <cmath>
#include <stdexcept>

namespace capo {

namespace {

void check_policy(const TabularMdp& mdp, const Eigen::MatrixXd& policy) {
    if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions)
        throw std::invalid_argument("policy shape does not match the MDP");
    for (int s = 0; s < mdp.n_states; ++s) {
        if (policy.row(s).minCoeff() < 0.0 || std::abs(policy.row(s).sum() - 1.0) > 1e-9)
            throw std::invalid_argument("policy row is not a distribution");
    }
}

Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const Eigen::MatrixXd& policy) {
    Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states);
    for (int a = 0; a < mdp.n_actions; ++a)
        p_pi += policy.col(a).asDiagonal() * mdp.transition[a];
    return p_pi;
}

}  // namespace

ValueProfile policy_eval(const TabularMdp& mdp, const Eigen::MatrixXd& policy) {
    check_policy(mdp, policy);
    const int n = mdp.n_states;

    const Eigen::MatrixXd p_pi = policy_transition(mdp, policy);
    const Eigen::VectorXd r_pi = (policy.array() * mdp.reward.array()).rowwise().sum();
    const Eigen::MatrixXd sys =
        Eigen::MatrixXd::Identity(n, n) - mdp.gamma * p_pi;

    ValueProfile out;
    out.v = sys.partialPivLu().solve(r_pi);
    const double residual = (sys * out.v - r_pi).lpNorm<Eigen::Infinity>();
    if (!std::isfinite(residual) || residual > 1e-9)
        throw std::runtime_error("policy_eval: linear solve residual too large");

    out.q.resize(n, mdp.n_actions);
    for (int a = 0; a < mdp.n_actions; ++a)
        out.q.col(a) = mdp.reward.col(a) + mdp.gamma * (mdp.transition[a] * out.v);
    out.adv = out.q.colwise() - out.v;

    // reuse the transposed system for the visitation solve
    const Eigen::VectorXd rhs = (1.0 - mdp.gamma) * mdp.start_dist;
    out.visitation = sys.transpose().partialPivLu().solve(rhs);
    return out;
}

Eigen::VectorXd visitation(const TabularMdp& mdp, const Eigen::MatrixXd& policy,
                           const Eigen::VectorXd& start_dist) {
    check_policy(mdp, policy);
    if (start_dist.size() != mdp.n_states || start_dist.minCoeff() < 0.0 ||
        std::abs(start_dist.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("visitation: start_dist is not a distribution");

    const int n = mdp.n_states;
    const Eigen::MatrixXd sys =
        Eigen::MatrixXd::Identity(n, n) - mdp.gamma * policy_transition(mdp, policy).transpose();
    Eigen::VectorXd d = sys.partialPivLu().solve(((1.0 - mdp.gamma) * start_dist).eval());
    const double residual =
        (sys * d - (1.0 - mdp.gamma) * start_dist).lpNorm<Eigen::Infinity>();
    if (!std::isfinite(residual) || residual > 1e-9)
        throw std::runtime_error("visitation: linear solve residual too large");
    return d;
}

OptimalValues optimal_values(const TabularMdp& mdp, double tol) {
    if (tol <= 0.0) throw std::invalid_argument("optimal_values: tol must be positive");

    const int n = mdp.n_states;
    const double stop = tol * (1.0 - mdp.gamma) / mdp.gamma;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd next(n);

    for (long iter = 0; iter < 100'000'000L; ++iter) {
        for (int s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < mdp.n_actions; ++a) {
                const double qa = mdp.reward(s, a) + mdp.gamma * mdp.transition[a].row(s).dot(v);
                if (qa > best) best = qa;
            }
            next(s) = best;
        }
        const double delta = (next - v).lpNorm<Eigen::Infinity>();
        v = next;
        if (delta < stop) break;
    }

    OptimalValues out;
    out.v_star = v;
    out.greedy = Eigen::MatrixXd::Zero(n, mdp.n_actions);
    for (int s = 0; s < n; ++s) {
        int best_a = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double qa = mdp.reward(s, a) + mdp.gamma * mdp.transition[a].row(s).dot(v);
            if (qa > best) {  // strict comparison keeps the lowest index on ties
                best = qa;
                best_a = a;
            }
        }
        out.greedy(s, best_a) = 1.0;
    }
    return out;
}

double perf_difference(const TabularMdp& mdp, const Eigen::MatrixXd& pi_new,
                       const Eigen::MatrixXd& pi_old, const Eigen::VectorXd& start_dist) {
    const ValueProfile old_profile = policy_eval(mdp, pi_old);
    const Eigen::VectorXd d_new = visitation(mdp, pi_new, start_dist);
    const Eigen::VectorXd per_state = (pi_new.array() * old_profile.adv.array()).rowwise().sum();
    return d_new.dot(per_state) / (1.0 - mdp.gamma);
}

}  // namespace capo
