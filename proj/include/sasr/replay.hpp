#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "sasr/rng.hpp"

namespace sasr {

/// Outcome label attached to a replay transition once its trajectory segment
/// has been classified. Moves from Unknown to a terminal label exactly once.
enum class SuccessFlag : uint8_t { Unknown = 0, Success = 1, Failure = 2 };

struct Transition {
    Eigen::VectorXd state;
    Eigen::VectorXd action;
    double env_reward = 0.0;
    Eigen::VectorXd next_state;
    bool terminated = false;
    SuccessFlag success_flag = SuccessFlag::Unknown;
};

/// Fixed-capacity ring buffer over transitions, stored column-of-arrays for
/// cheap batch gathers. Uniform sampling with replacement.
class ReplayBuffer {
public:
    /// Handle for deferred flag updates; stale after the slot is overwritten.
    struct SlotRef {
        std::size_t index = 0;
        uint64_t ticket = 0;
    };

    ReplayBuffer(std::size_t capacity, int state_dim, int action_dim);

    SlotRef add(const Eigen::Ref<const Eigen::VectorXd>& state,
                const Eigen::Ref<const Eigen::VectorXd>& action, double env_reward,
                const Eigen::Ref<const Eigen::VectorXd>& next_state, bool terminated);
    SlotRef add(const Transition& t);

    /// Applies the flag if the slot still holds the referenced transition.
    bool set_flag(const SlotRef& ref, SuccessFlag flag);

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    int state_dim() const { return static_cast<int>(states_.cols()); }
    int action_dim() const { return static_cast<int>(actions_.cols()); }

    Transition get(std::size_t index) const;
    SuccessFlag flag(std::size_t index) const { return flags_[index]; }

    void sample_indices(std::size_t batch, Rng& rng, std::vector<std::size_t>& out) const;

    /// Gathers rows into caller-allocated matrices (batch x dim).
    void gather(const std::vector<std::size_t>& indices, Eigen::MatrixXd& states,
                Eigen::MatrixXd& actions, Eigen::VectorXd& rewards, Eigen::MatrixXd& next_states,
                Eigen::ArrayXd& terminated) const;

    void save(std::ostream& os) const;
    static ReplayBuffer load(std::istream& is);

private:
    std::size_t capacity_;
    std::size_t size_ = 0;
    std::size_t cursor_ = 0;
    uint64_t next_ticket_ = 1;

    Eigen::MatrixXd states_;       // capacity x state_dim (rows grow with use)
    Eigen::MatrixXd actions_;
    Eigen::MatrixXd next_states_;
    std::vector<double> rewards_;
    std::vector<uint8_t> terminated_;
    std::vector<SuccessFlag> flags_;
    std::vector<uint64_t> tickets_;
};

}  // namespace sasr
