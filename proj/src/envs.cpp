#include "sasr/envs.hpp"

#include <cmath>
#include <stdexcept>

#include "sasr/rng.hpp"
#include "sasr/serialize.hpp"

namespace sasr {

Eigen::VectorXd MountainCarEnv::state_low() const {
    Eigen::VectorXd lo(2);
    lo << kMinPosition, -kMaxSpeed;
    return lo;
}

Eigen::VectorXd MountainCarEnv::state_high() const {
    Eigen::VectorXd hi(2);
    hi << kMaxPosition, kMaxSpeed;
    return hi;
}

Eigen::VectorXd MountainCarEnv::observation() const {
    Eigen::VectorXd s(2);
    s << position_, velocity_;
    return s;
}

Eigen::VectorXd MountainCarEnv::reset(uint64_t seed) {
    Rng rng(seed);
    position_ = rng.uniform(-0.6, -0.4);
    velocity_ = 0.0;
    steps_ = 0;
    return observation();
}

StepResult MountainCarEnv::step(const Eigen::Ref<const Eigen::VectorXd>& action) {
    if (action.size() != 1) throw std::invalid_argument("MountainCarEnv::step: action dim mismatch");
    const double a = clip_action(action(0));
    velocity_ += kForce * a - kGravity * std::cos(3.0 * position_);
    velocity_ = std::min(std::max(velocity_, -kMaxSpeed), kMaxSpeed);
    position_ += velocity_;
    position_ = std::min(std::max(position_, kMinPosition), kMaxPosition);
    ++steps_;

    StepResult result;
    result.next_state = observation();
    result.terminated = position_ >= kGoalPosition;
    result.reward = result.terminated ? 1.0 : 0.0;
    result.truncated = !result.terminated && steps_ >= kMaxEpisodeSteps;
    return result;
}

void MountainCarEnv::save_state(std::ostream& os) const {
    io::write_f64(os, position_);
    io::write_f64(os, velocity_);
    io::write_u64(os, static_cast<uint64_t>(steps_));
    io::write_u64(os, clipped_actions_);
}

void MountainCarEnv::load_state(std::istream& is) {
    position_ = io::read_f64(is);
    velocity_ = io::read_f64(is);
    steps_ = static_cast<int>(io::read_u64(is));
    clipped_actions_ = io::read_u64(is);
}

void MountainCarEnv::set_state(double position, double velocity) {
    position_ = std::min(std::max(position, kMinPosition), kMaxPosition);
    velocity_ = std::min(std::max(velocity, -kMaxSpeed), kMaxSpeed);
}

SparseChainEnv::SparseChainEnv(int length) : length_(length) {
    if (length < 1) throw std::invalid_argument("SparseChainEnv: length must be >= 1");
}

Eigen::VectorXd SparseChainEnv::state_low() const {
    return Eigen::VectorXd::Zero(1);
}

Eigen::VectorXd SparseChainEnv::state_high() const {
    Eigen::VectorXd hi(1);
    hi << static_cast<double>(length_);
    return hi;
}

Eigen::VectorXd SparseChainEnv::observation() const {
    Eigen::VectorXd s(1);
    s << static_cast<double>(index_);
    return s;
}

Eigen::VectorXd SparseChainEnv::reset(uint64_t /*seed*/) {
    index_ = 0;
    steps_ = 0;
    return observation();
}

StepResult SparseChainEnv::step(const Eigen::Ref<const Eigen::VectorXd>& action) {
    if (action.size() != 1) throw std::invalid_argument("SparseChainEnv::step: action dim mismatch");
    const double a = clip_action(action(0));
    index_ += a >= 0.0 ? 1 : -1;
    index_ = std::min(std::max(index_, 0), length_);
    ++steps_;

    StepResult result;
    result.next_state = observation();
    result.terminated = index_ >= length_;
    result.reward = result.terminated ? 1.0 : 0.0;
    result.truncated = !result.terminated && steps_ >= kMaxEpisodeSteps;
    return result;
}

void SparseChainEnv::save_state(std::ostream& os) const {
    io::write_u64(os, static_cast<uint64_t>(index_));
    io::write_u64(os, static_cast<uint64_t>(steps_));
    io::write_u64(os, clipped_actions_);
}

void SparseChainEnv::load_state(std::istream& is) {
    index_ = static_cast<int>(io::read_u64(is));
    steps_ = static_cast<int>(io::read_u64(is));
    clipped_actions_ = io::read_u64(is);
}

std::unique_ptr<Env> make_env(const std::string& name, int chain_length) {
    if (name == "mountain-car") return std::make_unique<MountainCarEnv>();
    if (name == "sparse-chain") return std::make_unique<SparseChainEnv>(chain_length);
    throw std::invalid_argument("make_env: unknown environment '" + name + "'");
}

}  // namespace sasr
