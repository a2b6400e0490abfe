#pragma once

#include <Eigen/Dense>

namespace capo {

/// Tabular softmax policy parameters. Row s of theta defines
/// pi(a|s) = exp(theta(s,a)) / sum_a' exp(theta(s,a')).
class SoftmaxTable {
  public:
    SoftmaxTable(int n_states, int n_actions)
        : theta(Eigen::MatrixXd::Zero(n_states, n_actions)) {}
    explicit SoftmaxTable(Eigen::MatrixXd initial) : theta(std::move(initial)) {}

    Eigen::MatrixXd theta;

    int n_states() const { return static_cast<int>(theta.rows()); }
    int n_actions() const { return static_cast<int>(theta.cols()); }

    /// Row-max-stabilized softmax of row s. Throws std::invalid_argument on
    /// non-finite parameters.
    Eigen::VectorXd action_probs(int s) const;

    /// Full policy matrix, one softmax row per state.
    Eigen::MatrixXd probs() const;

    /// log pi(a|s) = theta(s,a) - logsumexp(theta(s,:)); stays finite where
    /// the probability itself would underflow.
    double log_prob(int s, int a) const;

    /// Subtracts each row's mean; probabilities are unchanged by softmax
    /// shift invariance. Called periodically to stop parameter drift.
    void recenter();

    /// Bookkeeping for drift control: recenters once 10^4 coordinate
    /// updates have accumulated.
    void count_updates(long n);

  private:
    long updates_since_recenter_ = 0;
};

/// CAPO step size: min(log(1/pi_sa), clip). Requires pi_sa in (0,1).
double capo_alpha(double pi_sa, double clip);

/// Parameters of the on-policy step-size schedule, including the per-pair
/// visit counts it consults.
struct OnCapoConfig {
    double beta;   // in (0, 1/(|A|+1)]
    double zeta;   // in (0, 1/|A|]
    Eigen::MatrixXi visit_counts;  // N(s,a); incremented by the caller on selection

    OnCapoConfig(double beta_, double zeta_, int n_states, int n_actions)
        : beta(beta_), zeta(zeta_),
          visit_counts(Eigen::MatrixXi::Zero(n_states, n_actions)) {}

    /// Checks beta and zeta against the admissible ranges for n_actions.
    void validate(int n_actions) const;
};

/// On-policy step size. Branches on the advantage sign:
///   sign <= 0                 -> log(1/pi)
///   sign > 0 and pi < beta    -> log(beta/(1-beta) * 1/pi)
///   otherwise                 -> zeta * log((N+1)/N), requires N >= 1
double oncapo_alpha(double pi_sa, int adv_sign, const OnCapoConfig& cfg, int s, int a);

}  // namespace capo
