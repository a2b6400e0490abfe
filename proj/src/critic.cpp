#include <capo/critic.hpp>

#include <cmath>
#include <stdexcept>

namespace capo {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Rollout rollout) {
    if (rollout.steps.empty()) throw std::invalid_argument("ReplayBuffer: empty rollout");
    rollouts_.push_back(std::move(rollout));
    while (rollouts_.size() > capacity_) rollouts_.pop_front();
}

std::vector<double> retrace_targets(const Rollout& rollout, const QEstimate& q,
                                    const Eigen::MatrixXd& target_policy, double gamma,
                                    const std::vector<bool>& terminal) {
    const int len = rollout.length();
    std::vector<double> delta(len);
    std::vector<double> c(len);

    auto expected_q = [&](int s) {
        if (terminal[s]) return 0.0;
        return target_policy.row(s).dot(q.q.row(s));
    };

    for (int t = 0; t < len; ++t) {
        const Transition& tr = rollout.steps[t];
        if (!(tr.behavior_prob > 0.0))
            throw std::invalid_argument("retrace_targets: behavior probability must be positive");
        delta[t] = tr.reward + gamma * expected_q(tr.next_state) - q.q(tr.state, tr.action);
        c[t] = q.lambda * std::min(1.0, target_policy(tr.state, tr.action) / tr.behavior_prob);
    }

    // backward accumulation: g_t = delta_t + gamma * c_{t+1} * g_{t+1}
    std::vector<double> target(len);
    double g = 0.0;
    for (int t = len - 1; t >= 0; --t) {
        g = delta[t] + (t + 1 < len ? gamma * c[t + 1] * g : 0.0);
        target[t] = q.q(rollout.steps[t].state, rollout.steps[t].action) + g;
    }
    return target;
}

void fit_q(const ReplayBuffer& buffer, QEstimate& q, const Eigen::MatrixXd& target_policy,
           double gamma, const std::vector<bool>& terminal, int n_sweeps, double kappa) {
    if (buffer.empty()) throw std::invalid_argument("fit_q: buffer is empty");
    for (int sweep = 0; sweep < n_sweeps; ++sweep) {
        for (const Rollout& rollout : buffer.rollouts()) {
            const std::vector<double> target =
                retrace_targets(rollout, q, target_policy, gamma, terminal);
            for (int t = 0; t < rollout.length(); ++t) {
                const Transition& tr = rollout.steps[t];
                q.q(tr.state, tr.action) += kappa * (target[t] - q.q(tr.state, tr.action));
            }
        }
    }
}

Eigen::MatrixXi advantage_signs_from_q(const Eigen::MatrixXd& q, const Eigen::MatrixXd& policy,
                                       double dead_zone) {
    Eigen::MatrixXi signs = Eigen::MatrixXi::Zero(q.rows(), q.cols());
    for (int s = 0; s < q.rows(); ++s) {
        const double v = policy.row(s).dot(q.row(s));
        for (int a = 0; a < q.cols(); ++a) {
            const double adv = q(s, a) - v;
            if (adv > dead_zone) signs(s, a) = 1;
            else if (adv < -dead_zone) signs(s, a) = -1;
        }
    }
    return signs;
}

}  // namespace capo
