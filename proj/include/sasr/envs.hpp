#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <string>

namespace sasr {

struct StepResult {
    Eigen::VectorXd next_state;
    double reward = 0.0;
    bool terminated = false;
    bool truncated = false;
};

/// Common environment contract: seedable reset, bounded states and actions,
/// binary sparse rewards. One instance per run; single-owner mutable state.
class Env {
public:
    virtual ~Env() = default;

    virtual std::string name() const = 0;
    virtual int state_dim() const = 0;
    virtual int action_dim() const = 0;
    virtual double action_low() const = 0;
    virtual double action_high() const = 0;
    virtual Eigen::VectorXd state_low() const = 0;
    virtual Eigen::VectorXd state_high() const = 0;
    virtual int max_episode_steps() const = 0;

    virtual Eigen::VectorXd reset(uint64_t seed) = 0;
    virtual StepResult step(const Eigen::Ref<const Eigen::VectorXd>& action) = 0;

    /// Episode-in-progress state, for exact checkpoint resume.
    virtual void save_state(std::ostream& os) const = 0;
    virtual void load_state(std::istream& is) = 0;

    /// Out-of-range actions are clipped, never rejected; this counts them.
    uint64_t clipped_action_count() const { return clipped_actions_; }

protected:
    double clip_action(double a) {
        if (a < action_low() || a > action_high()) {
            ++clipped_actions_;
            return std::min(std::max(a, action_low()), action_high());
        }
        return a;
    }

    uint64_t clipped_actions_ = 0;
};

/// Continuous mountain car with a sparse goal reward: state (position,
/// velocity), reward 1 exactly when the car reaches the right hilltop,
/// episodes truncated at 1000 steps.
class MountainCarEnv : public Env {
public:
    static constexpr double kMinPosition = -1.2;
    static constexpr double kMaxPosition = 0.6;
    static constexpr double kMaxSpeed = 0.07;
    static constexpr double kGoalPosition = 0.45;
    static constexpr double kForce = 0.0015;
    static constexpr double kGravity = 0.0025;
    static constexpr int kMaxEpisodeSteps = 1000;

    std::string name() const override { return "mountain-car"; }
    int state_dim() const override { return 2; }
    int action_dim() const override { return 1; }
    double action_low() const override { return -1.0; }
    double action_high() const override { return 1.0; }
    Eigen::VectorXd state_low() const override;
    Eigen::VectorXd state_high() const override;
    int max_episode_steps() const override { return kMaxEpisodeSteps; }

    Eigen::VectorXd reset(uint64_t seed) override;
    StepResult step(const Eigen::Ref<const Eigen::VectorXd>& action) override;
    void save_state(std::ostream& os) const override;
    void load_state(std::istream& is) override;

    /// Test/analysis hook; does not reset the step counter.
    void set_state(double position, double velocity);

private:
    double position_ = -0.5;
    double velocity_ = 0.0;
    int steps_ = 0;
    Eigen::VectorXd observation() const;
};

/// One-dimensional chain: the agent starts at index 0 and must reach index
/// `length`; each step moves +-1 by the sign of the action. Reward 1 only at
/// the far end; episodes truncated at 200 steps. A synthetic micro-benchmark
/// for fast tests, not a published task.
class SparseChainEnv : public Env {
public:
    static constexpr int kMaxEpisodeSteps = 200;

    explicit SparseChainEnv(int length = 20);

    std::string name() const override { return "sparse-chain"; }
    int state_dim() const override { return 1; }
    int action_dim() const override { return 1; }
    double action_low() const override { return -1.0; }
    double action_high() const override { return 1.0; }
    Eigen::VectorXd state_low() const override;
    Eigen::VectorXd state_high() const override;
    int max_episode_steps() const override { return kMaxEpisodeSteps; }
    int length() const { return length_; }

    Eigen::VectorXd reset(uint64_t seed) override;
    StepResult step(const Eigen::Ref<const Eigen::VectorXd>& action) override;
    void save_state(std::ostream& os) const override;
    void load_state(std::istream& is) override;

private:
    int length_;
    int index_ = 0;
    int steps_ = 0;
    Eigen::VectorXd observation() const;
};

/// Factory over the registered environment names.
std::unique_ptr<Env> make_env(const std::string& name, int chain_length = 20);

}  // namespace sasr
