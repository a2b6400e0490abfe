#include <capo/capo.hpp>
#include <capo/critic.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace capo {

namespace {

// Parameters this far below a row's logsumexp already map to probability 0
// in double arithmetic; clamping them keeps every theta finite.
constexpr double kThetaFloor = -1e6;

double logsumexp_row(const Eigen::MatrixXd& theta, int s) {
    const double m = theta.row(s).maxCoeff();
    double acc = 0.0;
    for (int a = 0; a < theta.cols(); ++a) acc += std::exp(theta(s, a) - m);
    return m + std::log(acc);
}

int checked_sign(const Eigen::MatrixXi& adv_signs, int s, int a) {
    const int sign = adv_signs(s, a);
    if (sign < -1 || sign > 1)
        throw std::invalid_argument("capo_update: advantage sign outside {-1,0,+1}");
    return sign;
}

// The on-policy schedule counts every selection of a coordinate, before
// its step size is evaluated.
void note_selection(const StepRule& rule, int s, int a) {
    if (const auto* r = std::get_if<OnCapoRule>(&rule)) r->cfg->visit_counts(s, a) += 1;
}

// Step size for one coordinate. log(1/pi) is evaluated in the log domain as
// logsumexp(theta row) - theta(s,a) so it stays finite even where pi itself
// underflows.
double step_alpha(const StepRule& rule, const SoftmaxTable& table, double row_lse, int s, int a,
                  int sign) {
    return std::visit(
        [&](const auto& r) -> double {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, CapoAlphaRule>) {
                return std::min(row_lse - table.theta(s, a), r.clip);
            } else if constexpr (std::is_same_v<T, FixedEtaRule>) {
                return r.eta;
            } else {
                const double pi_sa = std::exp(table.theta(s, a) - row_lse);
                return oncapo_alpha(pi_sa, sign, *r.cfg, s, a);
            }
        },
        rule);
}

}  // namespace

void capo_update(SoftmaxTable& table, const CoordinateBatch& batch,
                 const Eigen::MatrixXi& adv_signs, const StepRule& rule, ApplyMode mode) {
    if (adv_signs.rows() != table.n_states() || adv_signs.cols() != table.n_actions())
        throw std::invalid_argument("capo_update: sign table shape mismatch");
    for (const auto& [s, a] : batch.pairs) {
        if (s < 0 || s >= table.n_states() || a < 0 || a >= table.n_actions())
            throw std::invalid_argument("capo_update: coordinate out of range");
    }

    if (mode == ApplyMode::simultaneous) {
        std::vector<std::pair<int, int>> sorted = batch.pairs;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("capo_update: duplicate coordinate in simultaneous batch");

        // All alphas come from the pre-update table.
        std::vector<double> row_lse(table.n_states(),
                                    std::numeric_limits<double>::quiet_NaN());
        std::vector<double> moves(batch.pairs.size());
        for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
            const auto [s, a] = batch.pairs[i];
            if (std::isnan(row_lse[s])) row_lse[s] = logsumexp_row(table.theta, s);
            const int sign = checked_sign(adv_signs, s, a);
            note_selection(rule, s, a);
            moves[i] = sign == 0 ? 0.0
                                 : step_alpha(rule, table, row_lse[s], s, a, sign) * sign;
        }
        for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
            const auto [s, a] = batch.pairs[i];
            table.theta(s, a) = std::max(table.theta(s, a) + moves[i], kThetaFloor);
        }
    } else {
        for (const auto& [s, a] : batch.pairs) {
            const int sign = checked_sign(adv_signs, s, a);
            note_selection(rule, s, a);
            if (sign == 0) continue;
            const double lse = logsumexp_row(table.theta, s);
            const double alpha = step_alpha(rule, table, lse, s, a, sign);
            table.theta(s, a) = std::max(table.theta(s, a) + alpha * sign, kThetaFloor);
        }
    }
    table.count_updates(static_cast<long>(batch.pairs.size()));
}

WeightDelta predicted_weight_delta(const Eigen::VectorXd& pi_row, int a_m, int sign) {
    if (sign != 1 && sign != -1)
        throw std::invalid_argument("predicted_weight_delta: sign must be +1 or -1");
    const int k = static_cast<int>(pi_row.size());
    const double p = pi_row(a_m);

    WeightDelta out;
    out.delta.resize(k);
    if (sign == 1) {
        const double gain = (1.0 - p) * (1.0 - p) / (2.0 - p);
        for (int a = 0; a < k; ++a)
            out.delta(a) = (a == a_m) ? gain : -(1.0 - p) / (2.0 - p) * pi_row(a);
    } else {
        const double denom = p * p - p + 1.0;
        const double loss = p * (1.0 - p) * (1.0 - p) / denom;
        for (int a = 0; a < k; ++a)
            out.delta(a) = (a == a_m) ? -loss : p * (1.0 - p) / denom * pi_row(a);
    }
    return out;
}

Eigen::VectorXd batch_capo_weights(const Eigen::VectorXd& pi_row,
                                   const Eigen::VectorXi& adv_signs_row) {
    const int k = static_cast<int>(pi_row.size());
    Eigen::VectorXd w(k);
    for (int a = 0; a < k; ++a) {
        const int sign = adv_signs_row(a);
        if (sign > 0) w(a) = 1.0;
        else if (sign == 0) w(a) = pi_row(a);
        else w(a) = pi_row(a) * pi_row(a);
    }
    return w / w.sum();
}

double fixed_lr_one_step_improvement(double d_next, double pi_am, double adv_am, double eta,
                                     double gamma) {
    if (!(eta > 0.0))
        throw std::invalid_argument("fixed_lr_one_step_improvement: eta must be positive");
    if (adv_am == 0.0) return 0.0;
    const double p = pi_am;
    if (adv_am > 0.0) {
        const double grow = std::expm1(eta);  // e^eta - 1
        return d_next / (1.0 - gamma) * (grow * p) / (grow * p + 1.0) * adv_am;
    }
    const double shrink = -std::expm1(-eta);  // 1 - e^{-eta}
    return d_next / (1.0 - gamma) * (shrink * p) / ((std::exp(-eta) - 1.0) * p + 1.0) *
           (-adv_am);
}

namespace {

std::vector<std::pair<int, int>> row_major_pairs(int n_states, int n_actions) {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(n_states) * n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) pairs.emplace_back(s, a);
    return pairs;
}

void validate_generator(const Generator& gen, const TabularMdp& mdp) {
    if (const auto* cyc = std::get_if<CyclicGenerator>(&gen); cyc && !cyc->order.empty()) {
        const std::size_t want =
            static_cast<std::size_t>(mdp.n_states) * static_cast<std::size_t>(mdp.n_actions);
        if (cyc->order.size() != want)
            throw std::invalid_argument("cyclic order must cover every (s,a) exactly once");
        auto sorted = cyc->order;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() ||
            sorted.front() != std::make_pair(0, 0) ||
            sorted.back() != std::make_pair(mdp.n_states - 1, mdp.n_actions - 1))
            throw std::invalid_argument("cyclic order must cover every (s,a) exactly once");
    }
    if (const auto* rnd = std::get_if<RandomizedGenerator>(&gen)) {
        if (rnd->d_gen.rows() != mdp.n_states || rnd->d_gen.cols() != mdp.n_actions)
            throw std::invalid_argument("d_gen shape does not match the MDP");
        if (rnd->d_gen.minCoeff() <= 0.0)
            throw std::invalid_argument("d_gen must be strictly positive everywhere");
        if (std::abs(rnd->d_gen.sum() - 1.0) > 1e-9)
            throw std::invalid_argument("d_gen must sum to 1");
    }
}

Eigen::VectorXd nonterminal_start(const TabularMdp& mdp) {
    Eigen::VectorXd start = mdp.start_dist;
    for (int s = 0; s < mdp.n_states; ++s)
        if (mdp.terminal[s]) start(s) = 0.0;
    const double total = start.sum();
    if (total <= 0.0)
        throw std::invalid_argument("behavior generator: no non-terminal start state");
    return start / total;
}

}  // namespace

CoordinateBatch next_batch(const Generator& gen, long iteration, const SoftmaxTable& table,
                           const TabularMdp& mdp, Xoshiro256pp& rng) {
    CoordinateBatch batch;
    batch.iteration = iteration;

    std::visit(
        [&](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, CyclicGenerator>) {
                if (g.order.empty()) {
                    const long total =
                        static_cast<long>(mdp.n_states) * static_cast<long>(mdp.n_actions);
                    const long i = iteration % total;
                    batch.pairs.emplace_back(static_cast<int>(i / mdp.n_actions),
                                             static_cast<int>(i % mdp.n_actions));
                } else {
                    batch.pairs.push_back(
                        g.order[static_cast<std::size_t>(iteration % g.order.size())]);
                }
            } else if constexpr (std::is_same_v<T, RandomizedGenerator>) {
                const double u = rng.uniform();
                double acc = 0.0;
                int pick = mdp.n_states * mdp.n_actions - 1;
                for (int i = 0; i < mdp.n_states * mdp.n_actions; ++i) {
                    acc += g.d_gen(i / mdp.n_actions, i % mdp.n_actions);
                    if (u < acc) {
                        pick = i;
                        break;
                    }
                }
                batch.pairs.emplace_back(pick / mdp.n_actions, pick % mdp.n_actions);
            } else if constexpr (std::is_same_v<T, BatchGenerator>) {
                batch.pairs = row_major_pairs(mdp.n_states, mdp.n_actions);
            } else {
                const double eps =
                    std::max(g.eps_floor,
                             g.eps_start * std::pow(g.eps_decay, static_cast<double>(iteration)));
                const Eigen::MatrixXd mixed =
                    (1.0 - eps) * table.probs() +
                    Eigen::MatrixXd::Constant(mdp.n_states, mdp.n_actions,
                                              eps / mdp.n_actions);
                const int start = sample_index(nonterminal_start(mdp), rng);
                const Rollout rollout =
                    sample_rollout(mdp, mixed, start, g.rollout_len, rng);
                for (const Transition& tr : rollout.steps)
                    batch.pairs.emplace_back(tr.state, tr.action);
            }
        },
        gen);
    return batch;
}

namespace {

Eigen::MatrixXi exact_signs(const Eigen::MatrixXd& adv) {
    Eigen::MatrixXi signs = Eigen::MatrixXi::Zero(adv.rows(), adv.cols());
    for (int s = 0; s < adv.rows(); ++s)
        for (int a = 0; a < adv.cols(); ++a) {
            if (adv(s, a) > 0.0) signs(s, a) = 1;
            else if (adv(s, a) < 0.0) signs(s, a) = -1;
        }
    return signs;
}

}  // namespace

std::vector<TrainRecord> train(const TabularMdp& mdp, Generator gen, StepRule rule,
                               CriticMode critic, long iters, const Eigen::VectorXd& start_dist,
                               Xoshiro256pp& rng, const TrainOptions& opt,
                               SoftmaxTable* final_table) {
    if (iters < 0) throw std::invalid_argument("train: iters must be non-negative");
    validate_generator(gen, mdp);

    SoftmaxTable table(mdp.n_states, mdp.n_actions);
    if (opt.theta0) {
        if (opt.theta0->rows() != mdp.n_states || opt.theta0->cols() != mdp.n_actions)
            throw std::invalid_argument("train: theta0 shape mismatch");
        table.theta = *opt.theta0;
    }

    const OptimalValues opt_values = optimal_values(mdp, opt.vstar_tol);
    const double vstar_mu = start_dist.dot(opt_values.v_star);

    const bool sequential = std::holds_alternative<BehaviorEpsGreedyGenerator>(gen);

    // Sample-based critic state (only touched in retrace mode).
    ReplayBuffer buffer(opt.retrace.buffer_capacity);
    QEstimate q(mdp.n_states, mdp.n_actions, opt.retrace.kappa, opt.retrace.lambda);

    std::vector<TrainRecord> history;
    history.reserve(static_cast<std::size_t>(iters) + 1);

    auto log_policy = [&](long m) {
        const ValueProfile profile = policy_eval(mdp, table.probs());
        const double v_mu = start_dist.dot(profile.v);
        history.push_back({m, v_mu, vstar_mu - v_mu, profile.v});
        return vstar_mu - v_mu;
    };

    double gap = log_policy(0);
    if (opt.stop_gap > 0.0 && gap < opt.stop_gap) {
        if (final_table) *final_table = table;
        return history;
    }

    for (long m = 0; m < iters; ++m) {
        const CoordinateBatch batch = next_batch(gen, m, table, mdp, rng);

        if (critic == CriticMode::retrace) {
            const auto& rc = opt.retrace;
            const double eps = std::max(
                rc.eps_floor, rc.eps_start * std::pow(rc.eps_decay, static_cast<double>(m)));
            const Eigen::MatrixXd behavior =
                (1.0 - eps) * table.probs() +
                Eigen::MatrixXd::Constant(mdp.n_states, mdp.n_actions, eps / mdp.n_actions);
            const Eigen::VectorXd start = [&] {
                Eigen::VectorXd sd = mdp.start_dist;
                for (int s = 0; s < mdp.n_states; ++s)
                    if (mdp.terminal[s]) sd(s) = 0.0;
                return (sd / sd.sum()).eval();
            }();
            for (int k = 0; k < rc.n_rollouts; ++k)
                buffer.push(sample_rollout(mdp, behavior, sample_index(start, rng),
                                           rc.rollout_len, rng));
            fit_q(buffer, q, table.probs(), mdp.gamma, mdp.terminal, rc.sweeps, rc.kappa);
        }

        if (sequential) {
            // Behavior-driven batches keep repeats; the advantage is
            // re-evaluated before every sub-update.
            for (const auto& pair : batch.pairs) {
                CoordinateBatch single;
                single.iteration = m;
                single.pairs.push_back(pair);
                const Eigen::MatrixXi signs =
                    critic == CriticMode::exact
                        ? exact_signs(policy_eval(mdp, table.probs()).adv)
                        : advantage_signs_from_q(q.q, table.probs(), opt.sign_dead_zone);
                capo_update(table, single, signs, rule, ApplyMode::sequential);
            }
        } else {
            const Eigen::MatrixXi signs =
                critic == CriticMode::exact
                    ? exact_signs(policy_eval(mdp, table.probs()).adv)
                    : advantage_signs_from_q(q.q, table.probs(), opt.sign_dead_zone);
            capo_update(table, batch, signs, rule, ApplyMode::simultaneous);
        }

        gap = log_policy(m + 1);
        if (opt.stop_gap > 0.0 && gap < opt.stop_gap) break;
    }
    if (final_table) *final_table = table;
    return history;
}

}  // namespace capo
