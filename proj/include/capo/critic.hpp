#pragma once

#include <capo/mdp.hpp>

#include <Eigen/Dense>

#include <deque>
#include <vector>

namespace capo {

/// Bounded FIFO store of rollouts; eviction is strictly oldest-first.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Rollout rollout);
    std::size_t size() const { return rollouts_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return rollouts_.empty(); }
    const std::deque<Rollout>& rollouts() const { return rollouts_; }

  private:
    std::size_t capacity_;
    std::deque<Rollout> rollouts_;
};

/// Tabular action-value estimate fitted to off-policy returns.
struct QEstimate {
    Eigen::MatrixXd q;  // (s, a)
    double kappa = 0.1;
    double lambda = 1.0;

    QEstimate(int n_states, int n_actions, double kappa_ = 0.1, double lambda_ = 1.0)
        : q(Eigen::MatrixXd::Zero(n_states, n_actions)), kappa(kappa_), lambda(lambda_) {}
};

/// Retrace(lambda) forward-view targets for every step of a rollout:
///   target_t = q(s_t,a_t) + sum_{j>=t} gamma^{j-t} (prod_{i=t+1..j} c_i) delta_j
/// with c_i = lambda * min(1, pi(a_i|s_i)/b_i) and
/// delta_j = r_j + gamma * sum_a pi(a|s_{j+1}) q(s_{j+1},a) - q(s_j,a_j).
/// Bootstrap values at terminal states are 0.
std::vector<double> retrace_targets(const Rollout& rollout, const QEstimate& q,
                                    const Eigen::MatrixXd& target_policy, double gamma,
                                    const std::vector<bool>& terminal);

/// n_sweeps full passes over the buffer; each visited step pulls
/// q(s,a) toward its retrace target by a factor kappa.
void fit_q(const ReplayBuffer& buffer, QEstimate& q, const Eigen::MatrixXd& target_policy,
           double gamma, const std::vector<bool>& terminal, int n_sweeps, double kappa);

/// sign(q(s,a) - sum_a pi(a|s) q(s,a)) with dead zone: magnitudes below
/// dead_zone count as 0.
Eigen::MatrixXi advantage_signs_from_q(const Eigen::MatrixXd& q, const Eigen::MatrixXd& policy,
                                       double dead_zone = 1e-8);

}  // namespace capo
