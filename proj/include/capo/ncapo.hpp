#pragma once

#include <capo/capo.hpp>
#include <capo/mdp.hpp>
#include <capo/rng.hpp>

#include <Eigen/Dense>

#include <vector>

namespace capo {

/// One-hidden-layer softmax policy over one-hot state encodings.
struct MlpPolicy {
    int input_dim = 0;
    int hidden = 0;
    int n_actions = 0;
    Eigen::MatrixXd w1;  // (hidden, input_dim)
    Eigen::VectorXd b1;  // (hidden)
    Eigen::MatrixXd w2;  // (n_actions, hidden)
    Eigen::VectorXd b2;  // (n_actions)

    /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    static MlpPolicy init(int input_dim, int hidden, int n_actions, Xoshiro256pp& rng);

    Eigen::VectorXd hidden_activations(int s) const;  // relu(w1 e_s + b1)
    Eigen::VectorXd logits(int s) const;
    Eigen::VectorXd action_probs(int s) const;
    Eigen::MatrixXd policy_matrix(int n_states) const;
};

struct MlpGrad {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;

    static MlpGrad zeros(const MlpPolicy& net);
};

/// CAPO-shifted target logits and distributions for a set of states.
struct NcapoTarget {
    std::vector<int> states;        // row i of the matrices belongs to states[i]
    Eigen::MatrixXd target_logits;  // theta-hat
    Eigen::MatrixXd target_probs;   // softmax rows of theta-hat
};

/// theta_hat(s,a) = f(s,a) + alpha(s,a) * I{(s,a) in batch} * sign(A(s,a)),
/// with alpha = min(log(1/pi_f(a|s)), clip). f_rows holds one logits row per
/// entry of `states`.
NcapoTarget ncapo_target(const std::vector<int>& states, const Eigen::MatrixXd& f_rows,
                         const CoordinateBatch& batch, const Eigen::MatrixXi& adv_signs,
                         double clip);

/// Sum over target states of KL(pi_theta(.|s) || target(.|s)) and its exact
/// parameter gradient by backpropagation. Set reverse to differentiate
/// KL(target || pi_theta) instead.
std::pair<double, MlpGrad> kl_loss_and_grad(const MlpPolicy& net, const NcapoTarget& target,
                                            bool reverse = false);

enum class NcapoMode { exact_adv, replay_retrace };
enum class NcapoGen { cyclic, batch };

struct NcapoConfig {
    int hidden = 256;
    double lr = 0.001;
    int grad_steps = 30;
    int batch_size = 16;
    NcapoGen generator = NcapoGen::cyclic;  // exact_adv mode only
    double clip = 50.0;
    bool kl_reverse = false;
    long iters = 1000;
    std::uint64_t seed = 1;
    // replay_retrace mode
    int n_rollouts = 4;
    int rollout_len = 16;
    std::size_t buffer_capacity = 100;
    double kappa = 0.1;
    double lambda = 1.0;
    double tau_q = 0.05;
    double tau_theta = 1.0;
    double eps_start = 1.0;
    double eps_decay = 0.995;
    double eps_floor = 0.1;
};

struct NcapoRecord {
    long iteration = 0;
    double v_mu = 0.0;  // exact value of the network policy
    double loss = 0.0;  // KL loss of the last gradient step this iteration
};

/// final_net, when given, receives the trained policy network.
std::vector<NcapoRecord> train_ncapo(const TabularMdp& mdp, NcapoMode mode,
                                     const NcapoConfig& cfg, MlpPolicy* final_net = nullptr);

/// Flat CSV of named parameter blocks (block,index,value); the dims block
/// comes first so the network can be reconstructed.
void save_mlp_csv(const std::string& path, const MlpPolicy& net);
MlpPolicy load_mlp_csv(const std::string& path);

}  // namespace capo
