#include "sasr/replay.hpp"

#include <stdexcept>

#include "sasr/serialize.hpp"

namespace sasr {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
    if (state_dim < 1 || action_dim < 1) {
        throw std::invalid_argument("ReplayBuffer: dims must be >= 1");
    }
    states_.resize(static_cast<Eigen::Index>(capacity), state_dim);
    actions_.resize(static_cast<Eigen::Index>(capacity), action_dim);
    next_states_.resize(static_cast<Eigen::Index>(capacity), state_dim);
    rewards_.resize(capacity, 0.0);
    terminated_.resize(capacity, 0);
    flags_.resize(capacity, SuccessFlag::Unknown);
    tickets_.resize(capacity, 0);
}

ReplayBuffer::SlotRef ReplayBuffer::add(const Eigen::Ref<const Eigen::VectorXd>& state,
                                        const Eigen::Ref<const Eigen::VectorXd>& action,
                                        double env_reward,
                                        const Eigen::Ref<const Eigen::VectorXd>& next_state,
                                        bool terminated) {
    if (state.size() != states_.cols() || next_state.size() != states_.cols() ||
        action.size() != actions_.cols()) {
        throw std::invalid_argument("ReplayBuffer::add: dimension mismatch");
    }
    const std::size_t slot = cursor_;
    states_.row(static_cast<Eigen::Index>(slot)) = state.transpose();
    actions_.row(static_cast<Eigen::Index>(slot)) = action.transpose();
    next_states_.row(static_cast<Eigen::Index>(slot)) = next_state.transpose();
    rewards_[slot] = env_reward;
    terminated_[slot] = terminated ? 1 : 0;
    flags_[slot] = SuccessFlag::Unknown;
    tickets_[slot] = next_ticket_;

    SlotRef ref{slot, next_ticket_};
    ++next_ticket_;
    cursor_ = (cursor_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
    return ref;
}

ReplayBuffer::SlotRef ReplayBuffer::add(const Transition& t) {
    SlotRef ref = add(t.state, t.action, t.env_reward, t.next_state, t.terminated);
    flags_[ref.index] = t.success_flag;
    return ref;
}

bool ReplayBuffer::set_flag(const SlotRef& ref, SuccessFlag flag) {
    if (ref.index >= capacity_ || tickets_[ref.index] != ref.ticket) return false;
    flags_[ref.index] = flag;
    return true;
}

Transition ReplayBuffer::get(std::size_t index) const {
    if (index >= size_) throw std::out_of_range("ReplayBuffer::get: index out of range");
    Transition t;
    t.state = states_.row(static_cast<Eigen::Index>(index)).transpose();
    t.action = actions_.row(static_cast<Eigen::Index>(index)).transpose();
    t.next_state = next_states_.row(static_cast<Eigen::Index>(index)).transpose();
    t.env_reward = rewards_[index];
    t.terminated = terminated_[index] != 0;
    t.success_flag = flags_[index];
    return t;
}

void ReplayBuffer::sample_indices(std::size_t batch, Rng& rng,
                                  std::vector<std::size_t>& out) const {
    if (size_ == 0) throw std::logic_error("ReplayBuffer::sample_indices: buffer is empty");
    out.resize(batch);
    for (std::size_t i = 0; i < batch; ++i) out[i] = rng.uniform_index(size_);
}

void ReplayBuffer::gather(const std::vector<std::size_t>& indices, Eigen::MatrixXd& states,
                          Eigen::MatrixXd& actions, Eigen::VectorXd& rewards,
                          Eigen::MatrixXd& next_states, Eigen::ArrayXd& terminated) const {
    const auto b = static_cast<Eigen::Index>(indices.size());
    states.resize(b, states_.cols());
    actions.resize(b, actions_.cols());
    next_states.resize(b, next_states_.cols());
    rewards.resize(b);
    terminated.resize(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto idx = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(i)]);
        states.row(i) = states_.row(idx);
        actions.row(i) = actions_.row(idx);
        next_states.row(i) = next_states_.row(idx);
        rewards(i) = rewards_[indices[static_cast<std::size_t>(i)]];
        terminated(i) = terminated_[indices[static_cast<std::size_t>(i)]] != 0 ? 1.0 : 0.0;
    }
}

void ReplayBuffer::save(std::ostream& os) const {
    io::write_u64(os, capacity_);
    io::write_u64(os, static_cast<uint64_t>(states_.cols()));
    io::write_u64(os, static_cast<uint64_t>(actions_.cols()));
    io::write_u64(os, size_);
    io::write_u64(os, cursor_);
    io::write_u64(os, next_ticket_);
    for (std::size_t i = 0; i < size_; ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        io::write_f64_array(os, states_.row(idx).eval().data(),
                            static_cast<std::size_t>(states_.cols()));
        io::write_f64_array(os, actions_.row(idx).eval().data(),
                            static_cast<std::size_t>(actions_.cols()));
        io::write_f64_array(os, next_states_.row(idx).eval().data(),
                            static_cast<std::size_t>(next_states_.cols()));
        io::write_f64(os, rewards_[i]);
        io::write_u64(os, terminated_[i]);
        io::write_u64(os, static_cast<uint64_t>(flags_[i]));
        io::write_u64(os, tickets_[i]);
    }
}

ReplayBuffer ReplayBuffer::load(std::istream& is) {
    const std::size_t capacity = io::read_u64(is);
    const int state_dim = static_cast<int>(io::read_u64(is));
    const int action_dim = static_cast<int>(io::read_u64(is));
    ReplayBuffer buf(capacity, state_dim, action_dim);
    buf.size_ = io::read_u64(is);
    buf.cursor_ = io::read_u64(is);
    buf.next_ticket_ = io::read_u64(is);
    Eigen::VectorXd row(state_dim);
    Eigen::VectorXd arow(action_dim);
    for (std::size_t i = 0; i < buf.size_; ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        io::read_f64_array(is, row.data(), static_cast<std::size_t>(state_dim));
        buf.states_.row(idx) = row.transpose();
        io::read_f64_array(is, arow.data(), static_cast<std::size_t>(action_dim));
        buf.actions_.row(idx) = arow.transpose();
        io::read_f64_array(is, row.data(), static_cast<std::size_t>(state_dim));
        buf.next_states_.row(idx) = row.transpose();
        buf.rewards_[i] = io::read_f64(is);
        buf.terminated_[i] = static_cast<uint8_t>(io::read_u64(is));
        buf.flags_[i] = static_cast<SuccessFlag>(io::read_u64(is));
        buf.tickets_[i] = io::read_u64(is);
    }
    return buf;
}

}  // namespace sasr
