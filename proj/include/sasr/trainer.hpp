#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "sasr/envs.hpp"
#include "sasr/mathutil.hpp"
#include "sasr/sac.hpp"

namespace sasr {

struct TrainConfig {
    SacHyper sac;
    ShapingConfig shaping;
    int64_t total_steps = 300000;
    int64_t eval_interval = 10000;
    int eval_episodes = 20;
    /// Stop as soon as an evaluation reaches this mean return.
    double early_stop_return = std::numeric_limits<double>::infinity();
    bool log_visited_states = false;
    int reward_bin_grid = 32;           // per-dim bins for shaped-reward tracking
    bool oracle_keep_raw = false;       // keep raw states in the stores
    double bandwidth_final = 0.0;       // > 0 enables a linear bandwidth schedule
    int64_t reprojection_interval = 10000;
    int max_segment_steps = 0;          // 0: use the env's episode limit
    bool disable_shaping = false;       // run the bare backbone, no stores at all

    void validate() const;
};

struct EvalPoint {
    int64_t step = 0;
    double mean_return = 0.0;
    double stderr_return = 0.0;
    double shaped_mean = 0.0;   // over shaped-reward samples since the last eval
    double shaped_var = 0.0;
    double alpha_mean = 0.0;
    double beta_mean = 0.0;
    uint64_t success_store_size = 0;
    uint64_t failure_store_size = 0;
};

/// Tracks sampled shaped rewards on a fixed grid over the state box, in
/// windows of eval_interval steps. Supports the variance-over-training
/// analysis and the per-bin CSV dump.
class RewardBinLog {
public:
    RewardBinLog() = default;
    RewardBinLog(int grid, Eigen::VectorXd lo, Eigen::VectorXd hi, int64_t window_steps);

    void add(int64_t step, const Eigen::Ref<const Eigen::VectorXd>& state, double value);
    int bin_of(const Eigen::Ref<const Eigen::VectorXd>& state) const;

    int grid() const { return grid_; }
    int num_bins() const;
    int num_windows() const { return static_cast<int>(windows_.size()); }
    int64_t window_steps() const { return window_steps_; }
    const RunningStats& at(int window, int bin) const;
    /// Pooled stats for one bin over windows [begin, end).
    RunningStats pooled(int window_begin, int window_end, int bin) const;
    std::vector<uint64_t> counts_per_bin() const;

    void save(std::ostream& os) const;
    static RewardBinLog load(std::istream& is);

private:
    int grid_ = 0;
    Eigen::VectorXd lo_, hi_;
    int64_t window_steps_ = 1;
    std::vector<std::vector<RunningStats>> windows_;
};

/// Greedy rollouts; returns (mean return, standard error).
std::pair<double, double> evaluate_policy(SacAgent& agent, Env& env, int episodes, Rng& rng);

/// One seeded training run: collect transitions, classify finished
/// trajectories into the success/failure stores, and after burn-in update the
/// critics every step (with shaped rewards recomputed from the live stores),
/// the policy and temperature on their cadence, and the targets softly.
class Trainer {
public:
    Trainer(std::unique_ptr<Env> env, std::unique_ptr<Env> eval_env, TrainConfig cfg,
            uint64_t seed);

    /// Runs until total_steps or early stop.
    void run();
    void step_once();
    bool finished() const;

    int64_t current_step() const { return step_; }
    uint64_t seed() const { return seed_; }
    const TrainConfig& config() const { return cfg_; }
    const std::vector<EvalPoint>& curve() const { return curve_; }
    double last_eval_mean() const;
    const RewardBinLog& reward_bins() const { return reward_bins_; }
    const std::vector<double>& visited_flat() const { return visited_; }
    int state_dim() const { return env_->state_dim(); }

    SacAgent& agent() { return *agent_; }
    ReplayBuffer& replay() { return *replay_; }
    const LabeledStateStore* success_store() const { return success_.get(); }
    const LabeledStateStore* failure_store() const { return failure_.get(); }
    const RffProjector* projector() const { return projector_.get(); }
    Env& env() { return *env_; }

    /// Full training state; resuming from it continues the exact run.
    void save(std::ostream& os) const;
    static Trainer load(std::istream& is, std::unique_ptr<Env> env, std::unique_ptr<Env> eval_env);

private:
    Trainer(std::unique_ptr<Env> env, std::unique_ptr<Env> eval_env);

    ShapingContext shaping_context() const;
    void init_from_config();
    void evaluate_and_log();
    void maybe_reproject();

    TrainConfig cfg_;
    uint64_t seed_ = 0;
    std::unique_ptr<Env> env_, eval_env_;
    std::unique_ptr<RffProjector> projector_;
    std::unique_ptr<LabeledStateStore> success_, failure_;
    std::unique_ptr<SacAgent> agent_;
    std::unique_ptr<ReplayBuffer> replay_;

    Rng env_rng_{0}, action_rng_{0}, replay_rng_{0}, update_rng_{0}, retention_rng_{0},
        beta_rng_{0}, eval_rng_{0};

    Eigen::VectorXd state_;
    std::vector<TrajectoryStep> trajectory_;
    bool env_needs_reset_ = true;
    int64_t step_ = 0;
    bool stopped_early_ = false;
    int max_segment_steps_ = 0;

    std::vector<EvalPoint> curve_;
    RewardBinLog reward_bins_;
    RunningStats window_shaped_;
    double window_alpha_sum_ = 0.0, window_beta_sum_ = 0.0;
    uint64_t window_updates_ = 0;
    std::vector<double> visited_;

    std::vector<std::size_t> batch_indices_;
    Batch batch_;
};

}  // namespace sasr
