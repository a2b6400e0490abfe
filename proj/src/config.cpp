#include <capo/config.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace capo {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& what) { throw std::invalid_argument("config: " + what); }

double to_double(const std::string& v, const std::string& key) {
    std::size_t used = 0;
    double x = 0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        fail("bad number for " + key + ": '" + v + "'");
    }
    if (used != v.size()) fail("bad number for " + key + ": '" + v + "'");
    return x;
}

long to_long(const std::string& v, const std::string& key) {
    std::size_t used = 0;
    long x = 0;
    try {
        x = std::stol(v, &used);
    } catch (const std::exception&) {
        fail("bad integer for " + key + ": '" + v + "'");
    }
    if (used != v.size()) fail("bad integer for " + key + ": '" + v + "'");
    return x;
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail("bad boolean for " + key + ": '" + v + "'");
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& v, const std::string& key, F convert) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) fail("empty list element for " + key);
        out.push_back(convert(item, key));
    }
    if (out.empty()) fail("empty list for " + key);
    return out;
}

void check_ranges(const ExperimentConfig& c) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) fail(what);
    };
    require(c.seeds.size() >= 1, "seeds must be non-empty");
    require(c.iters >= 0, "iters must be non-negative");
    require(c.gamma > 0.0 && c.gamma < 1.0, "gamma must lie in (0,1)");
    require(c.env == "bandit" || c.env == "chain" || c.env == "random",
            "env must be bandit, chain, or random");
    require(c.env != "bandit" || c.bandit_rewards.size() >= 2, "bandit needs >= 2 rewards");
    require(c.env != "chain" || c.chain_n >= 3, "chain needs n >= 3");
    require(c.env != "random" || (c.n_states >= 2 && c.n_actions >= 2),
            "random env needs n_states >= 2 and n_actions >= 2");
    require(c.generator == "cyclic" || c.generator == "randomized" || c.generator == "batch" ||
                c.generator == "behavior",
            "generator must be cyclic, randomized, batch, or behavior");
    require(c.step_rule == "variable" || c.step_rule == "fixed",
            "step_rule must be variable or fixed");
    require(c.clip > 0.0, "clip must be positive");
    require(c.eta > 0.0, "eta must be positive");
    require(c.critic == "exact" || c.critic == "retrace", "critic must be exact or retrace");
    require(c.lambda > 0.0 && c.lambda <= 1.0, "lambda must lie in (0,1]");
    require(c.kappa > 0.0 && c.kappa <= 1.0, "kappa must lie in (0,1]");
    require(c.buffer_capacity >= 1, "buffer_capacity must be positive");
    require(c.sweeps >= 1, "sweeps must be positive");
    require(c.rollout_len >= 1, "rollout_len must be positive");
    require(c.n_rollouts >= 1, "n_rollouts must be positive");
    require(c.eps_floor >= 0.0 && c.eps_floor <= 1.0, "eps_floor must lie in [0,1]");
    require(c.eps_start >= c.eps_floor && c.eps_start <= 1.0,
            "eps_start must lie in [eps_floor,1]");
    require(c.eps_decay > 0.0 && c.eps_decay <= 1.0, "eps_decay must lie in (0,1]");
    require(c.beta > 0.0 && c.beta < 1.0, "beta must lie in (0,1)");
    require(c.zeta > 0.0 && c.zeta < 1.0, "zeta must lie in (0,1)");
    require(c.stuck_threshold > 0.0 && c.stuck_threshold < 1.0,
            "stuck_threshold must lie in (0,1)");
    require(c.converged_threshold > 0.0 && c.converged_threshold < 1.0,
            "converged_threshold must lie in (0,1)");
    require(c.hidden >= 1, "hidden must be positive");
    require(c.lr > 0.0, "lr must be positive");
    require(c.grad_steps >= 0, "grad_steps must be non-negative");
    require(c.batch_size >= 1, "batch_size must be positive");
    require(c.tau_q > 0.0 && c.tau_q <= 1.0, "tau_q must lie in (0,1]");
    require(c.tau_theta > 0.0 && c.tau_theta <= 1.0, "tau_theta must lie in (0,1]");
    require(c.offpac_eta > 0.0, "offpac_eta must be positive");
    require(c.ncapo_mode == "exact_adv" || c.ncapo_mode == "replay_retrace",
            "ncapo_mode must be exact_adv or replay_retrace");
    require(c.ncapo_generator == "cyclic" || c.ncapo_generator == "batch",
            "ncapo_generator must be cyclic or batch");
    const std::string algos[] = {"oncapo", "oncapo_fixed", "offcapo",
                                 "offcapo_fixed", "spg", "is_spg"};
    bool known = false;
    for (const auto& a : algos) known |= (c.algorithm == a);
    require(known, "unknown bandit algorithm '" + c.algorithm + "'");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig c;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;

    while (std::getline(in, line)) {
        ++lineno;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail("line " + std::to_string(lineno) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "run" && section != "env" && section != "algo" && section != "ncapo")
                fail("unknown section [" + section + "]");
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            fail("line " + std::to_string(lineno) + ": expected key = value");
        const std::string qual = section + "." + key;

        if (qual == "run.experiment") c.experiment = value;
        else if (qual == "run.seeds")
            c.seeds = to_list<std::uint64_t>(value, qual, [](const std::string& v,
                                                             const std::string& k) {
                return static_cast<std::uint64_t>(to_long(v, k));
            });
        else if (qual == "run.iters") c.iters = to_long(value, qual);
        else if (qual == "run.out_dir") c.out_dir = value;
        else if (qual == "env.kind") c.env = value;
        else if (qual == "env.bandit_rewards")
            c.bandit_rewards = to_list<double>(value, qual, to_double);
        else if (qual == "env.chain_n") c.chain_n = static_cast<int>(to_long(value, qual));
        else if (qual == "env.chain_step_reward") c.chain_step_reward = to_double(value, qual);
        else if (qual == "env.chain_goal_reward") c.chain_goal_reward = to_double(value, qual);
        else if (qual == "env.n_states") c.n_states = static_cast<int>(to_long(value, qual));
        else if (qual == "env.n_actions") c.n_actions = static_cast<int>(to_long(value, qual));
        else if (qual == "env.gamma") c.gamma = to_double(value, qual);
        else if (qual == "env.seed") c.env_seed = static_cast<std::uint64_t>(to_long(value, qual));
        else if (qual == "algo.generator") c.generator = value;
        else if (qual == "algo.step_rule") c.step_rule = value;
        else if (qual == "algo.clip") c.clip = to_double(value, qual);
        else if (qual == "algo.eta") c.eta = to_double(value, qual);
        else if (qual == "algo.algorithm") c.algorithm = value;
        else if (qual == "algo.beta") c.beta = to_double(value, qual);
        else if (qual == "algo.zeta") c.zeta = to_double(value, qual);
        else if (qual == "algo.theta0") c.theta0 = to_list<double>(value, qual, to_double);
        else if (qual == "algo.critic") c.critic = value;
        else if (qual == "algo.lambda") c.lambda = to_double(value, qual);
        else if (qual == "algo.kappa") c.kappa = to_double(value, qual);
        else if (qual == "algo.buffer_capacity") c.buffer_capacity = to_long(value, qual);
        else if (qual == "algo.sweeps") c.sweeps = static_cast<int>(to_long(value, qual));
        else if (qual == "algo.rollout_len") c.rollout_len = static_cast<int>(to_long(value, qual));
        else if (qual == "algo.n_rollouts") c.n_rollouts = static_cast<int>(to_long(value, qual));
        else if (qual == "algo.eps_start") c.eps_start = to_double(value, qual);
        else if (qual == "algo.eps_decay") c.eps_decay = to_double(value, qual);
        else if (qual == "algo.eps_floor") c.eps_floor = to_double(value, qual);
        else if (qual == "algo.offpac_eta") c.offpac_eta = to_double(value, qual);
        else if (qual == "algo.stuck_threshold") c.stuck_threshold = to_double(value, qual);
        else if (qual == "algo.converged_threshold")
            c.converged_threshold = to_double(value, qual);
        else if (qual == "ncapo.mode") c.ncapo_mode = value;
        else if (qual == "ncapo.generator") c.ncapo_generator = value;
        else if (qual == "ncapo.hidden") c.hidden = static_cast<int>(to_long(value, qual));
        else if (qual == "ncapo.lr") c.lr = to_double(value, qual);
        else if (qual == "ncapo.grad_steps") c.grad_steps = static_cast<int>(to_long(value, qual));
        else if (qual == "ncapo.batch_size") c.batch_size = static_cast<int>(to_long(value, qual));
        else if (qual == "ncapo.tau_q") c.tau_q = to_double(value, qual);
        else if (qual == "ncapo.tau_theta") c.tau_theta = to_double(value, qual);
        else if (qual == "ncapo.kl_reverse") c.kl_reverse = to_bool(value, qual);
        else fail("unknown key '" + qual + "'");
    }

    check_ranges(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

}  // namespace capo
