#pragma once

#include <capo/mdp.hpp>

#include <Eigen/Dense>

namespace capo {

/// Closed-form evaluation of a fixed policy: state values, action values,
/// advantages, and the discounted visitation of the MDP's start distribution.
struct ValueProfile {
    Eigen::VectorXd v;           // per state
    Eigen::MatrixXd q;           // (s, a)
    Eigen::MatrixXd adv;         // q(s,a) - v(s)
    Eigen::VectorXd visitation;  // d^pi_mu under mdp.start_dist
};

/// Solves (I - gamma P_pi) v = r_pi by dense LU and derives q and adv.
/// Throws std::runtime_error if the solve residual exceeds 1e-9 sup-norm.
ValueProfile policy_eval(const TabularMdp& mdp, const Eigen::MatrixXd& policy);

/// Discounted state visitation: d solves d' = (1-gamma) mu + gamma P_pi' d.
Eigen::VectorXd visitation(const TabularMdp& mdp, const Eigen::MatrixXd& policy,
                           const Eigen::VectorXd& start_dist);

struct OptimalValues {
    Eigen::VectorXd v_star;
    Eigen::MatrixXd greedy;  // deterministic rows; ties go to the lowest action index
};

/// Value iteration to sup-norm accuracy tol; the stopping rule bounds
/// ||v - V*||_inf < tol.
OptimalValues optimal_values(const TabularMdp& mdp, double tol = 1e-10);

/// (1/(1-gamma)) sum_s d^{pi_new}_mu(s) sum_a pi_new(a|s) A^{pi_old}(s,a),
/// which equals V^{pi_new}(mu) - V^{pi_old}(mu).
double perf_difference(const TabularMdp& mdp, const Eigen::MatrixXd& pi_new,
                       const Eigen::MatrixXd& pi_old, const Eigen::VectorXd& start_dist);

}  // namespace capo
