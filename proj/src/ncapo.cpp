#include <capo/ncapo.hpp>

#include <capo/critic.hpp>
#include <capo/csv.hpp>
#include <capo/exact.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace capo {

namespace {

double logsumexp(const Eigen::VectorXd& x) {
    const double m = x.maxCoeff();
    return m + std::log((x.array() - m).exp().sum());
}

Eigen::VectorXd stable_softmax(const Eigen::VectorXd& x) {
    Eigen::VectorXd e = (x.array() - x.maxCoeff()).exp();
    return e / e.sum();
}

}  // namespace

MlpPolicy MlpPolicy::init(int input_dim, int hidden, int n_actions, Xoshiro256pp& rng) {
    if (input_dim < 1 || hidden < 1 || n_actions < 2)
        throw std::invalid_argument("MlpPolicy: bad dimensions");

    MlpPolicy net;
    net.input_dim = input_dim;
    net.hidden = hidden;
    net.n_actions = n_actions;
    net.w1.resize(hidden, input_dim);
    net.b1.resize(hidden);
    net.w2.resize(n_actions, hidden);
    net.b2.resize(n_actions);

    auto fill = [&rng](auto& m, double bound) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                m(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
    };
    fill(net.w1, 1.0 / std::sqrt(static_cast<double>(input_dim)));
    fill(net.b1, 1.0 / std::sqrt(static_cast<double>(input_dim)));
    fill(net.w2, 1.0 / std::sqrt(static_cast<double>(hidden)));
    fill(net.b2, 1.0 / std::sqrt(static_cast<double>(hidden)));
    return net;
}

Eigen::VectorXd MlpPolicy::hidden_activations(int s) const {
    return (w1.col(s) + b1).cwiseMax(0.0);
}

Eigen::VectorXd MlpPolicy::logits(int s) const {
    return w2 * hidden_activations(s) + b2;
}

Eigen::VectorXd MlpPolicy::action_probs(int s) const {
    const Eigen::VectorXd f = logits(s);
    if (!f.allFinite()) throw std::runtime_error("MlpPolicy: non-finite logits");
    return stable_softmax(f);
}

Eigen::MatrixXd MlpPolicy::policy_matrix(int n_states) const {
    Eigen::MatrixXd out(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) out.row(s) = action_probs(s).transpose();
    return out;
}

MlpGrad MlpGrad::zeros(const MlpPolicy& net) {
    return {Eigen::MatrixXd::Zero(net.hidden, net.input_dim), Eigen::VectorXd::Zero(net.hidden),
            Eigen::MatrixXd::Zero(net.n_actions, net.hidden),
            Eigen::VectorXd::Zero(net.n_actions)};
}

NcapoTarget ncapo_target(const std::vector<int>& states, const Eigen::MatrixXd& f_rows,
                         const CoordinateBatch& batch, const Eigen::MatrixXi& adv_signs,
                         double clip) {
    if (states.empty()) throw std::invalid_argument("ncapo_target: no states");
    if (f_rows.rows() != static_cast<Eigen::Index>(states.size()))
        throw std::invalid_argument("ncapo_target: one logits row per state required");

    NcapoTarget target;
    target.states = states;
    target.target_logits = f_rows;
    target.target_probs.resizeLike(f_rows);

    for (std::size_t i = 0; i < states.size(); ++i) {
        const int s = states[i];
        const Eigen::VectorXd row = f_rows.row(i).transpose();
        const double lse = logsumexp(row);
        for (const auto& [bs, ba] : batch.pairs) {
            if (bs != s) continue;
            const int sign = adv_signs(bs, ba);
            if (sign == 0) continue;
            const double alpha = std::min(lse - row(ba), clip);  // log(1/pi), clipped
            target.target_logits(i, ba) += alpha * sign;
        }
        target.target_probs.row(i) =
            stable_softmax(target.target_logits.row(i).transpose()).transpose();
    }
    return target;
}

std::pair<double, MlpGrad> kl_loss_and_grad(const MlpPolicy& net, const NcapoTarget& target,
                                            bool reverse) {
    MlpGrad grad = MlpGrad::zeros(net);
    double loss = 0.0;

    for (std::size_t i = 0; i < target.states.size(); ++i) {
        const int s = target.states[i];
        const Eigen::VectorXd z = net.hidden_activations(s);
        const Eigen::VectorXd f = net.w2 * z + net.b2;
        const Eigen::VectorXd logp = f.array() - logsumexp(f);
        const Eigen::VectorXd p = logp.array().exp();

        const Eigen::VectorXd t_logits = target.target_logits.row(i).transpose();
        if (!t_logits.allFinite())
            throw std::runtime_error("kl_loss_and_grad: target would make the KL infinite");
        const Eigen::VectorXd logt = t_logits.array() - logsumexp(t_logits);
        const Eigen::VectorXd t = logt.array().exp();

        double kl;
        Eigen::VectorXd g_logits;
        if (!reverse) {
            kl = (p.array() * (logp - logt).array()).sum();
            g_logits = p.array() * ((logp - logt).array() - kl);
        } else {
            kl = (t.array() * (logt - logp).array()).sum();
            g_logits = p - t;
        }
        if (!std::isfinite(kl))
            throw std::runtime_error("kl_loss_and_grad: target would make the KL infinite");
        loss += kl;

        grad.w2 += g_logits * z.transpose();
        grad.b2 += g_logits;
        Eigen::VectorXd g_pre = net.w2.transpose() * g_logits;
        const Eigen::VectorXd pre = net.w1.col(s) + net.b1;
        for (int h = 0; h < net.hidden; ++h)
            if (pre(h) <= 0.0) g_pre(h) = 0.0;
        grad.w1.col(s) += g_pre;
        grad.b1 += g_pre;
    }
    return {loss, grad};
}

namespace {

void apply_gradient(MlpPolicy& net, const MlpGrad& g, double lr) {
    net.w1 -= lr * g.w1;
    net.b1 -= lr * g.b1;
    net.w2 -= lr * g.w2;
    net.b2 -= lr * g.b2;
}

std::vector<int> unique_states(const CoordinateBatch& batch) {
    std::vector<int> states;
    for (const auto& [s, a] : batch.pairs) states.push_back(s);
    std::sort(states.begin(), states.end());
    states.erase(std::unique(states.begin(), states.end()), states.end());
    return states;
}

Eigen::MatrixXd logits_for(const MlpPolicy& net, const std::vector<int>& states) {
    Eigen::MatrixXd rows(states.size(), net.n_actions);
    for (std::size_t i = 0; i < states.size(); ++i)
        rows.row(i) = net.logits(states[i]).transpose();
    return rows;
}

Eigen::MatrixXi exact_signs(const Eigen::MatrixXd& adv) {
    Eigen::MatrixXi signs = Eigen::MatrixXi::Zero(adv.rows(), adv.cols());
    for (int s = 0; s < adv.rows(); ++s)
        for (int a = 0; a < adv.cols(); ++a) {
            if (adv(s, a) > 0.0) signs(s, a) = 1;
            else if (adv(s, a) < 0.0) signs(s, a) = -1;
        }
    return signs;
}

std::vector<NcapoRecord> train_exact_adv(const TabularMdp& mdp, const NcapoConfig& cfg,
                                         MlpPolicy* final_net) {
    Xoshiro256pp init_rng = Xoshiro256pp::stream(cfg.seed, 0);
    MlpPolicy net = MlpPolicy::init(mdp.n_states, cfg.hidden, mdp.n_actions, init_rng);

    const long total = static_cast<long>(mdp.n_states) * mdp.n_actions;
    std::vector<NcapoRecord> history;
    history.reserve(static_cast<std::size_t>(cfg.iters) + 1);
    history.push_back({0, mdp.start_dist.dot(policy_eval(mdp, net.policy_matrix(mdp.n_states)).v),
                       0.0});

    for (long m = 0; m < cfg.iters; ++m) {
        const Eigen::MatrixXd policy = net.policy_matrix(mdp.n_states);
        const ValueProfile profile = policy_eval(mdp, policy);
        const Eigen::MatrixXi signs = exact_signs(profile.adv);

        CoordinateBatch batch;
        batch.iteration = m;
        if (cfg.generator == NcapoGen::batch) {
            for (int s = 0; s < mdp.n_states; ++s)
                for (int a = 0; a < mdp.n_actions; ++a) batch.pairs.emplace_back(s, a);
        } else {
            for (int j = 0; j < cfg.batch_size; ++j) {
                const long i = (m * cfg.batch_size + j) % total;
                batch.pairs.emplace_back(static_cast<int>(i / mdp.n_actions),
                                         static_cast<int>(i % mdp.n_actions));
            }
        }

        const std::vector<int> states = unique_states(batch);
        const NcapoTarget target =
            ncapo_target(states, logits_for(net, states), batch, signs, cfg.clip);

        double loss = 0.0;
        for (int g = 0; g < cfg.grad_steps; ++g) {
            auto [l, grad] = kl_loss_and_grad(net, target, cfg.kl_reverse);
            apply_gradient(net, grad, cfg.lr);
            loss = l;
        }

        history.push_back(
            {m + 1, mdp.start_dist.dot(policy_eval(mdp, net.policy_matrix(mdp.n_states)).v),
             loss});
    }
    if (final_net) *final_net = net;
    return history;
}

std::vector<NcapoRecord> train_replay_retrace(const TabularMdp& mdp, const NcapoConfig& cfg,
                                              MlpPolicy* final_net) {
    Xoshiro256pp init_rng = Xoshiro256pp::stream(cfg.seed, 0);
    Xoshiro256pp rollout_rng = Xoshiro256pp::stream(cfg.seed, 1);
    Xoshiro256pp sample_rng = Xoshiro256pp::stream(cfg.seed, 2);

    MlpPolicy behavior_net = MlpPolicy::init(mdp.n_states, cfg.hidden, mdp.n_actions, init_rng);
    MlpPolicy target_net = behavior_net;
    QEstimate q(mdp.n_states, mdp.n_actions, cfg.kappa, cfg.lambda);
    QEstimate q_target = q;
    ReplayBuffer buffer(cfg.buffer_capacity);

    Eigen::VectorXd start = mdp.start_dist;
    for (int s = 0; s < mdp.n_states; ++s)
        if (mdp.terminal[s]) start(s) = 0.0;
    start /= start.sum();

    std::vector<NcapoRecord> history;
    history.reserve(static_cast<std::size_t>(cfg.iters) + 1);
    history.push_back(
        {0, mdp.start_dist.dot(policy_eval(mdp, behavior_net.policy_matrix(mdp.n_states)).v),
         0.0});

    for (long m = 0; m < cfg.iters; ++m) {
        const double eps = std::max(
            cfg.eps_floor, cfg.eps_start * std::pow(cfg.eps_decay, static_cast<double>(m)));
        const Eigen::MatrixXd behavior =
            (1.0 - eps) * behavior_net.policy_matrix(mdp.n_states) +
            Eigen::MatrixXd::Constant(mdp.n_states, mdp.n_actions, eps / mdp.n_actions);
        for (int k = 0; k < cfg.n_rollouts; ++k)
            buffer.push(sample_rollout(mdp, behavior, sample_index(start, rollout_rng),
                                       cfg.rollout_len, rollout_rng));

        double loss = 0.0;
        for (int g = 0; g < cfg.grad_steps; ++g) {
            const auto& rollouts = buffer.rollouts();
            const Rollout& rollout =
                rollouts[static_cast<std::size_t>(sample_rng.below(rollouts.size()))];

            const Eigen::MatrixXd target_policy = target_net.policy_matrix(mdp.n_states);
            const std::vector<double> targets =
                retrace_targets(rollout, q_target, target_policy, mdp.gamma, mdp.terminal);
            for (int t = 0; t < rollout.length(); ++t) {
                const Transition& tr = rollout.steps[t];
                q.q(tr.state, tr.action) += cfg.kappa * (targets[t] - q.q(tr.state, tr.action));
            }

            const Eigen::MatrixXd policy = behavior_net.policy_matrix(mdp.n_states);
            const Eigen::MatrixXi signs = advantage_signs_from_q(q.q, policy);
            CoordinateBatch batch;
            batch.iteration = m;
            for (const Transition& tr : rollout.steps) batch.pairs.emplace_back(tr.state, tr.action);
            const std::vector<int> states = unique_states(batch);
            const NcapoTarget target = ncapo_target(states, logits_for(behavior_net, states),
                                                    batch, signs, cfg.clip);
            auto [l, grad] = kl_loss_and_grad(behavior_net, target, cfg.kl_reverse);
            apply_gradient(behavior_net, grad, cfg.lr);
            loss = l;
        }

        // polyak updates of the target critic and target network
        q_target.q = cfg.tau_q * q.q + (1.0 - cfg.tau_q) * q_target.q;
        target_net.w1 = cfg.tau_theta * behavior_net.w1 + (1.0 - cfg.tau_theta) * target_net.w1;
        target_net.b1 = cfg.tau_theta * behavior_net.b1 + (1.0 - cfg.tau_theta) * target_net.b1;
        target_net.w2 = cfg.tau_theta * behavior_net.w2 + (1.0 - cfg.tau_theta) * target_net.w2;
        target_net.b2 = cfg.tau_theta * behavior_net.b2 + (1.0 - cfg.tau_theta) * target_net.b2;

        history.push_back(
            {m + 1,
             mdp.start_dist.dot(policy_eval(mdp, behavior_net.policy_matrix(mdp.n_states)).v),
             loss});
    }
    if (final_net) *final_net = behavior_net;
    return history;
}

}  // namespace

std::vector<NcapoRecord> train_ncapo(const TabularMdp& mdp, NcapoMode mode,
                                     const NcapoConfig& cfg, MlpPolicy* final_net) {
    if (cfg.iters < 0) throw std::invalid_argument("train_ncapo: iters must be non-negative");
    if (cfg.grad_steps < 0) throw std::invalid_argument("train_ncapo: grad_steps must be >= 0");
    if (mode == NcapoMode::exact_adv) return train_exact_adv(mdp, cfg, final_net);
    return train_replay_retrace(mdp, cfg, final_net);
}

void save_mlp_csv(const std::string& path, const MlpPolicy& net) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "block,index,value\n";
    auto write_block = [&](const char* name, const double* data, Eigen::Index size) {
        for (Eigen::Index i = 0; i < size; ++i)
            out << name << "," << i << "," << CsvWriter::format(data[i]) << "\n";
    };
    out << "dims,0," << net.input_dim << "\n";
    out << "dims,1," << net.hidden << "\n";
    out << "dims,2," << net.n_actions << "\n";
    write_block("w1", net.w1.data(), net.w1.size());
    write_block("b1", net.b1.data(), net.b1.size());
    write_block("w2", net.w2.data(), net.w2.size());
    write_block("b2", net.b2.data(), net.b2.size());
}

MlpPolicy load_mlp_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "block,index,value")
        throw std::runtime_error("'" + path + "': expected header block,index,value");

    int dims[3] = {0, 0, 0};
    std::vector<std::pair<std::string, double>> entries;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string block, index_str, value_str;
        if (!std::getline(ss, block, ',') || !std::getline(ss, index_str, ',') ||
            !std::getline(ss, value_str))
            throw std::runtime_error("'" + path + "': malformed row '" + line + "'");
        if (block == "dims") {
            const int i = std::stoi(index_str);
            if (i < 0 || i > 2) throw std::runtime_error("'" + path + "': bad dims row");
            dims[i] = static_cast<int>(std::stod(value_str));
        } else {
            entries.emplace_back(block, std::stod(value_str));
        }
    }

    MlpPolicy net;
    net.input_dim = dims[0];
    net.hidden = dims[1];
    net.n_actions = dims[2];
    if (net.input_dim < 1 || net.hidden < 1 || net.n_actions < 2)
        throw std::runtime_error("'" + path + "': missing or invalid dims block");
    net.w1.resize(net.hidden, net.input_dim);
    net.b1.resize(net.hidden);
    net.w2.resize(net.n_actions, net.hidden);
    net.b2.resize(net.n_actions);

    const std::size_t expected = static_cast<std::size_t>(net.w1.size()) + net.b1.size() +
                                 net.w2.size() + net.b2.size();
    if (entries.size() != expected)
        throw std::runtime_error("'" + path + "': parameter count mismatch");

    std::size_t cursor = 0;
    auto read_block = [&](const char* name, double* data, Eigen::Index size) {
        for (Eigen::Index i = 0; i < size; ++i, ++cursor) {
            if (entries[cursor].first != name)
                throw std::runtime_error("'" + path + "': unexpected block order");
            data[i] = entries[cursor].second;
        }
    };
    read_block("w1", net.w1.data(), net.w1.size());
    read_block("b1", net.b1.data(), net.b1.size());
    read_block("w2", net.w2.data(), net.w2.size());
    read_block("b2", net.b2.data(), net.b2.size());
    return net;
}

}  // namespace capo
