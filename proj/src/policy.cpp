#include <capo/policy.hpp>

#include <cmath>
#include <stdexcept>

namespace capo {

namespace {

double logsumexp_row(const Eigen::MatrixXd& theta, int s) {
    const double m = theta.row(s).maxCoeff();
    double acc = 0.0;
    for (int a = 0; a < theta.cols(); ++a) acc += std::exp(theta(s, a) - m);
    return m + std::log(acc);
}

}  // namespace

Eigen::VectorXd SoftmaxTable::action_probs(int s) const {
    if (!theta.row(s).allFinite())
        throw std::invalid_argument("action_probs: non-finite policy parameter");
    const double m = theta.row(s).maxCoeff();
    Eigen::VectorXd e = (theta.row(s).array() - m).exp().transpose();
    return e / e.sum();
}

Eigen::MatrixXd SoftmaxTable::probs() const {
    Eigen::MatrixXd out(theta.rows(), theta.cols());
    for (int s = 0; s < theta.rows(); ++s) out.row(s) = action_probs(s).transpose();
    return out;
}

double SoftmaxTable::log_prob(int s, int a) const {
    if (!theta.row(s).allFinite())
        throw std::invalid_argument("log_prob: non-finite policy parameter");
    return theta(s, a) - logsumexp_row(theta, s);
}

void SoftmaxTable::recenter() {
    theta.colwise() -= theta.rowwise().mean();
}

void SoftmaxTable::count_updates(long n) {
    updates_since_recenter_ += n;
    if (updates_since_recenter_ >= 10'000) {
        recenter();
        updates_since_recenter_ = 0;
    }
}

double capo_alpha(double pi_sa, double clip) {
    if (!(pi_sa > 0.0 && pi_sa < 1.0))
        throw std::domain_error("capo_alpha: pi_sa must lie in (0,1)");
    if (!(clip > 0.0)) throw std::domain_error("capo_alpha: clip must be positive");
    return std::min(std::log(1.0 / pi_sa), clip);
}

void OnCapoConfig::validate(int n_actions) const {
    if (!(beta > 0.0 && beta <= 1.0 / (n_actions + 1)))
        throw std::invalid_argument("on-policy CAPO: beta outside (0, 1/(|A|+1)]");
    if (!(zeta > 0.0 && zeta <= 1.0 / n_actions))
        throw std::invalid_argument("on-policy CAPO: zeta outside (0, 1/|A|]");
}

double oncapo_alpha(double pi_sa, int adv_sign, const OnCapoConfig& cfg, int s, int a) {
    if (!(pi_sa > 0.0 && pi_sa < 1.0))
        throw std::domain_error("oncapo_alpha: pi_sa must lie in (0,1)");
    if (adv_sign <= 0) return std::log(1.0 / pi_sa);
    if (pi_sa < cfg.beta) return std::log(cfg.beta / (1.0 - cfg.beta) / pi_sa);
    const int n = cfg.visit_counts(s, a);
    if (n < 1)
        throw std::invalid_argument(
            "oncapo_alpha: visit count must be incremented before the count branch");
    return cfg.zeta * std::log((static_cast<double>(n) + 1.0) / static_cast<double>(n));
}

}  // namespace capo
