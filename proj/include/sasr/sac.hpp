#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "sasr/density.hpp"
#include "sasr/nn.hpp"
#include "sasr/replay.hpp"
#include "sasr/rff.hpp"
#include "sasr/rng.hpp"
#include "sasr/shaping.hpp"

namespace sasr {

struct SacHyper {
    double discount = 0.99;
    double soft_update_tau = 5e-3;
    std::size_t replay_capacity = 1000000;
    int batch_size = 256;
    double actor_lr = 3e-4;
    double critic_lr = 1e-3;
    double temperature_lr = 1e-4;
    int policy_update_freq = 2;   // one policy/temperature update every N env steps
    int target_update_freq = 1;   // soft target update every N env steps
    int64_t burn_in_steps = 5000;
    std::vector<int> hidden_dims = {64, 64};
    double initial_temperature = 1.0;

    void validate() const;
};

/// Everything update-time reward shaping needs. Inactive (pure env reward)
/// when lambda is zero or any piece is missing.
struct ShapingContext {
    const LabeledStateStore* success_store = nullptr;
    const LabeledStateStore* failure_store = nullptr;
    const RffProjector* projector = nullptr;
    const ShapingConfig* config = nullptr;

    bool active() const {
        return config != nullptr && config->lambda_weight != 0.0 && success_store != nullptr &&
               failure_store != nullptr && projector != nullptr;
    }
};

struct Batch {
    Eigen::MatrixXd states;
    Eigen::MatrixXd actions;
    Eigen::VectorXd env_rewards;
    Eigen::MatrixXd next_states;
    Eigen::ArrayXd terminated;

    Eigen::Index size() const { return states.rows(); }
};

struct CriticStats {
    double loss = 0.0;
    Eigen::VectorXd shaped;  // sampled shaped reward per batch element; empty when inactive
    double alpha_mean = 0.0;
    double beta_mean = 0.0;
};

/// Shaped rewards for a batch of transitions: project states (or
/// state-action pairs), estimate success/failure counts against the current
/// stores, then sample and scale. Recomputed from live stores on every call.
Eigen::VectorXd shaped_reward_batch(const Eigen::Ref<const Eigen::MatrixXd>& states,
                                    const Eigen::Ref<const Eigen::MatrixXd>& actions,
                                    const ShapingContext& ctx, Rng& beta_rng,
                                    double* alpha_mean = nullptr, double* beta_mean = nullptr);

/// Soft actor-critic with twin critics, frozen targets and a learned entropy
/// temperature. All updates are batched; value-type copyable for snapshots.
class SacAgent {
public:
    SacAgent(int state_dim, int action_dim, double action_low, double action_high,
             const SacHyper& hyper, Rng& init_rng);

    /// Stochastic: tanh-squashed Gaussian draw mapped to the action bounds.
    /// Greedy: squashed mean. Always within bounds.
    Eigen::VectorXd select_action(const Eigen::Ref<const Eigen::VectorXd>& state, bool stochastic,
                                  Rng& rng);

    /// Bootstrapped targets: r_env (+ lambda * R^S(s)) + gamma * (1 - done) *
    /// (min target Q(s', a') - temperature * log pi(a'|s')), a' ~ pi(.|s').
    Eigen::VectorXd compute_targets(const Batch& batch, const ShapingContext& ctx,
                                    Rng& update_rng, Rng& beta_rng, CriticStats* stats = nullptr);

    /// One gradient step on both critics toward compute_targets().
    double update_critics(const Batch& batch, const ShapingContext& ctx, Rng& update_rng,
                          Rng& beta_rng, CriticStats* stats = nullptr);

    /// One gradient step minimizing E[temperature * log pi(a|s) - min Q(s, a)]
    /// with reparameterized actions.
    double update_policy(const Batch& batch, Rng& update_rng);

    /// One gradient step moving the log-temperature toward the entropy target.
    double update_temperature(const Batch& batch, Rng& update_rng);

    void soft_update_targets();

    double temperature() const { return std::exp(log_temperature_); }
    double log_temperature() const { return log_temperature_; }
    void set_log_temperature(double lt) { log_temperature_ = lt; }
    double target_entropy() const { return target_entropy_; }
    void set_target_entropy(double h) { target_entropy_ = h; }
    const SacHyper& hyper() const { return hyper_; }
    int state_dim() const { return state_dim_; }
    int action_dim() const { return action_dim_; }

    Mlp& policy() { return policy_; }
    Mlp& critic1() { return q1_; }
    Mlp& critic2() { return q2_; }
    Mlp& target1() { return q1_target_; }
    Mlp& target2() { return q2_target_; }

    void save(std::ostream& os) const;
    static SacAgent load(std::istream& is);

    /// Exposed for gradient tests: loss and parameter gradients of the policy
    /// objective at fixed reparameterization noise.
    double policy_objective(const Eigen::Ref<const Eigen::MatrixXd>& states,
                            const Eigen::Ref<const Eigen::MatrixXd>& eps, MlpGradients* grads);

    static constexpr double kLogStdMin = -20.0;
    static constexpr double kLogStdMax = 2.0;

private:
    struct PolicySample {
        Eigen::MatrixXd mu, log_std, eps, pre_tanh, actions;
        Eigen::VectorXd log_prob;
        Eigen::ArrayXXd clamp_mask;
    };
    PolicySample sample_policy(const Eigen::Ref<const Eigen::MatrixXd>& states, Rng& rng);
    PolicySample sample_policy_with_eps(const Eigen::Ref<const Eigen::MatrixXd>& states,
                                        const Eigen::Ref<const Eigen::MatrixXd>& eps);

    SacHyper hyper_;
    int state_dim_, action_dim_;
    double action_center_, action_half_range_;
    double target_entropy_;

    Mlp policy_, q1_, q2_, q1_target_, q2_target_;
    AdamOptimizer policy_opt_, q1_opt_, q2_opt_;
    double log_temperature_;
    ScalarAdam temp_opt_;
};

/// One rollout step as the trainer accumulates it.
struct TrajectoryStep {
    Eigen::VectorXd state;
    Eigen::VectorXd action;
    double env_reward = 0.0;
    ReplayBuffer::SlotRef slot;
};

/// Splits a completed trajectory at positive-reward steps; a segment is a
/// success when it ends in a positive reward within max_segment_steps, the
/// trailing rewardless segment is a failure. Segment states (or state-action
/// pairs) are recorded into the matching store and replay flags are set.
void classify_and_commit(const std::vector<TrajectoryStep>& trajectory,
                         LabeledStateStore& success_store, LabeledStateStore& failure_store,
                         const RffProjector& projector, const ShapingConfig& cfg,
                         int max_segment_steps, ReplayBuffer* replay, Rng& retention_rng);

}  // namespace sasr
