#include "sasr/sac.hpp"

#include <cmath>
#include <stdexcept>

#include "sasr/serialize.hpp"

namespace sasr {
namespace {

// log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u)), evaluated stably.
inline double log_one_minus_tanh_sq(double u) {
    const double x = -2.0 * u;
    const double sp = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    return 2.0 * (std::log(2.0) - u - sp);
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)

}  // namespace

void SacHyper::validate() const {
    if (!(discount >= 0.0) || discount > 1.0) throw std::invalid_argument("SacHyper: discount must be in [0, 1]");
    if (!(soft_update_tau > 0.0) || soft_update_tau > 1.0) {
        throw std::invalid_argument("SacHyper: soft_update_tau must be in (0, 1]");
    }
    if (replay_capacity < 1) throw std::invalid_argument("SacHyper: replay_capacity must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("SacHyper: batch_size must be >= 1");
    if (!(actor_lr > 0.0) || !(critic_lr > 0.0) || !(temperature_lr > 0.0)) {
        throw std::invalid_argument("SacHyper: learning rates must be positive");
    }
    if (policy_update_freq < 1 || target_update_freq < 1) {
        throw std::invalid_argument("SacHyper: update frequencies must be >= 1");
    }
    if (burn_in_steps < 0) throw std::invalid_argument("SacHyper: burn_in_steps must be >= 0");
}

Eigen::VectorXd shaped_reward_batch(const Eigen::Ref<const Eigen::MatrixXd>& states,
                                    const Eigen::Ref<const Eigen::MatrixXd>& actions,
                                    const ShapingContext& ctx, Rng& beta_rng, double* alpha_mean,
                                    double* beta_mean) {
    if (!ctx.active()) throw std::logic_error("shaped_reward_batch: inactive shaping context");
    const ShapingConfig& cfg = *ctx.config;
    Eigen::MatrixXd inputs;
    if (cfg.state_action_features) {
        inputs.resize(states.rows(), states.cols() + actions.cols());
        inputs << states, actions;
    } else {
        inputs = states;
    }
    const Eigen::MatrixXd features = ctx.projector->project_rows(inputs);
    const Eigen::VectorXd n_success = ctx.success_store->estimate_counts_rows(features);
    const Eigen::VectorXd n_failure = ctx.failure_store->estimate_counts_rows(features);

    Eigen::VectorXd shaped(states.rows());
    double asum = 0.0, bsum = 0.0;
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const CountEstimate counts{n_success(i), n_failure(i)};
        const BetaParams params = BetaParams::from_counts(counts);
        asum += params.alpha;
        bsum += params.beta;
        shaped(i) = shaped_reward(counts, cfg, beta_rng);
    }
    if (alpha_mean != nullptr) *alpha_mean = asum / static_cast<double>(features.rows());
    if (beta_mean != nullptr) *beta_mean = bsum / static_cast<double>(features.rows());
    return shaped;
}

SacAgent::SacAgent(int state_dim, int action_dim, double action_low, double action_high,
                   const SacHyper& hyper, Rng& init_rng)
    : hyper_(hyper), state_dim_(state_dim), action_dim_(action_dim),
      action_center_((action_high + action_low) / 2.0),
      action_half_range_((action_high - action_low) / 2.0),
      target_entropy_(-static_cast<double>(action_dim)),
      policy_(state_dim, hyper.hidden_dims, action_dim, HeadMode::Dual, init_rng),
      q1_(state_dim + action_dim, hyper.hidden_dims, 1, HeadMode::Single, init_rng),
      q2_(state_dim + action_dim, hyper.hidden_dims, 1, HeadMode::Single, init_rng),
      q1_target_(q1_), q2_target_(q2_),
      policy_opt_(policy_, hyper.actor_lr), q1_opt_(q1_, hyper.critic_lr),
      q2_opt_(q2_, hyper.critic_lr),
      log_temperature_(std::log(hyper.initial_temperature)) {
    hyper.validate();
    if (!(action_half_range_ > 0.0)) {
        throw std::invalid_argument("SacAgent: action_high must exceed action_low");
    }
    temp_opt_.learning_rate = hyper.temperature_lr;
}

SacAgent::PolicySample SacAgent::sample_policy(const Eigen::Ref<const Eigen::MatrixXd>& states,
                                               Rng& rng) {
    Eigen::MatrixXd eps(states.rows(), action_dim_);
    for (Eigen::Index i = 0; i < eps.rows(); ++i) {
        for (Eigen::Index j = 0; j < eps.cols(); ++j) eps(i, j) = rng.normal();
    }
    return sample_policy_with_eps(states, eps);
}

SacAgent::PolicySample SacAgent::sample_policy_with_eps(
    const Eigen::Ref<const Eigen::MatrixXd>& states, const Eigen::Ref<const Eigen::MatrixXd>& eps) {
    policy_.forward(states);
    PolicySample s;
    s.mu = policy_.output();
    const Eigen::MatrixXd& raw = policy_.output_second();
    s.clamp_mask = (raw.array() > kLogStdMin && raw.array() < kLogStdMax).cast<double>();
    s.log_std = raw.array().max(kLogStdMin).min(kLogStdMax).matrix();
    s.eps = eps;
    s.pre_tanh = s.mu + (s.log_std.array().exp() * eps.array()).matrix();
    s.actions = (action_center_ + action_half_range_ * s.pre_tanh.array().tanh()).matrix();

    s.log_prob.resize(states.rows());
    for (Eigen::Index i = 0; i < states.rows(); ++i) {
        double lp = 0.0;
        for (Eigen::Index j = 0; j < action_dim_; ++j) {
            lp += -0.5 * eps(i, j) * eps(i, j) - s.log_std(i, j) - kHalfLog2Pi;
            lp -= log_one_minus_tanh_sq(s.pre_tanh(i, j)) + std::log(action_half_range_);
        }
        s.log_prob(i) = lp;
    }
    return s;
}

Eigen::VectorXd SacAgent::select_action(const Eigen::Ref<const Eigen::VectorXd>& state,
                                        bool stochastic, Rng& rng) {
    if (state.size() != state_dim_) {
        throw std::invalid_argument("select_action: state dimension mismatch");
    }
    if (!state.allFinite()) throw std::invalid_argument("select_action: non-finite state");
    Eigen::MatrixXd row = state.transpose();
    Eigen::VectorXd action(action_dim_);
    if (stochastic) {
        const PolicySample s = sample_policy(row, rng);
        action = s.actions.row(0).transpose();
    } else {
        policy_.forward(row);
        action = (action_center_ + action_half_range_ * policy_.output().row(0).array().tanh())
                     .matrix()
                     .transpose();
    }
    if (!action.allFinite()) {
        throw std::runtime_error("select_action: policy produced a non-finite action");
    }
    return action;
}

Eigen::VectorXd SacAgent::compute_targets(const Batch& batch, const ShapingContext& ctx,
                                          Rng& update_rng, Rng& beta_rng, CriticStats* stats) {
    const PolicySample next = sample_policy(batch.next_states, update_rng);

    Eigen::MatrixXd next_sa(batch.size(), state_dim_ + action_dim_);
    next_sa << batch.next_states, next.actions;
    q1_target_.forward(next_sa);
    const Eigen::VectorXd q1n = q1_target_.output().col(0);
    q2_target_.forward(next_sa);
    const Eigen::VectorXd q2n = q2_target_.output().col(0);
    const Eigen::ArrayXd min_q = q1n.array().min(q2n.array());

    Eigen::VectorXd rewards = batch.env_rewards;
    if (ctx.active()) {
        double am = 0.0, bm = 0.0;
        const Eigen::VectorXd shaped =
            shaped_reward_batch(batch.states, batch.actions, ctx, beta_rng, &am, &bm);
        rewards += ctx.config->lambda_weight * shaped;
        if (stats != nullptr) {
            stats->shaped = shaped;
            stats->alpha_mean = am;
            stats->beta_mean = bm;
        }
    }

    const Eigen::ArrayXd bootstrap =
        (1.0 - batch.terminated) * (min_q - temperature() * next.log_prob.array());
    return (rewards.array() + hyper_.discount * bootstrap).matrix();
}

double SacAgent::update_critics(const Batch& batch, const ShapingContext& ctx, Rng& update_rng,
                                Rng& beta_rng, CriticStats* stats) {
    if (batch.size() < 1) throw std::invalid_argument("update_critics: empty batch");
    const Eigen::VectorXd targets = compute_targets(batch, ctx, update_rng, beta_rng, stats);

    Eigen::MatrixXd sa(batch.size(), state_dim_ + action_dim_);
    sa << batch.states, batch.actions;
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    double loss = 0.0;
    for (Mlp* critic : {&q1_, &q2_}) {
        AdamOptimizer& opt = critic == &q1_ ? q1_opt_ : q2_opt_;
        critic->forward(sa);
        const Eigen::VectorXd q = critic->output().col(0);
        const Eigen::VectorXd err = q - targets;
        loss += err.squaredNorm() * inv_b;
        const Eigen::MatrixXd grad = (2.0 * inv_b) * err;
        opt.step(*critic, critic->backward(grad));
    }
    const double value = loss / 2.0;
    if (stats != nullptr) stats->loss = value;
    return value;
}

double SacAgent::update_policy(const Batch& batch, Rng& update_rng) {
    if (batch.size() < 1) throw std::invalid_argument("update_policy: empty batch");
    Eigen::MatrixXd eps(batch.size(), action_dim_);
    for (Eigen::Index i = 0; i < eps.rows(); ++i) {
        for (Eigen::Index j = 0; j < eps.cols(); ++j) eps(i, j) = update_rng.normal();
    }
    MlpGradients grads;
    const double loss = policy_objective(batch.states, eps, &grads);
    policy_opt_.step(policy_, grads);
    return loss;
}

double SacAgent::policy_objective(const Eigen::Ref<const Eigen::MatrixXd>& states,
                                  const Eigen::Ref<const Eigen::MatrixXd>& eps,
                                  MlpGradients* grads) {
    const PolicySample s = sample_policy_with_eps(states, eps);
    const Eigen::Index b = states.rows();
    const double inv_b = 1.0 / static_cast<double>(b);
    const double temp = temperature();

    Eigen::MatrixXd sa(b, state_dim_ + action_dim_);
    sa << states, s.actions;
    q1_.forward(sa);
    const Eigen::VectorXd q1 = q1_.output().col(0);
    q2_.forward(sa);
    const Eigen::VectorXd q2 = q2_.output().col(0);
    const Eigen::ArrayXd min_q = q1.array().min(q2.array());

    const double loss = inv_b * (temp * s.log_prob.array() - min_q).sum();
    if (grads == nullptr) return loss;

    // d(loss)/d(action) via whichever critic realizes the minimum.
    const Eigen::ArrayXd pick1 = (q1.array() <= q2.array()).cast<double>();
    Eigen::MatrixXd in_grad1, in_grad2;
    q1_.backward_input_only((-inv_b * pick1).matrix(), in_grad1);
    q2_.backward_input_only((-inv_b * (1.0 - pick1)).matrix(), in_grad2);
    const Eigen::MatrixXd dq_da = in_grad1.rightCols(action_dim_) + in_grad2.rightCols(action_dim_);

    const Eigen::ArrayXXd tanh_u = s.pre_tanh.array().tanh();
    // d(loss)/d(pre_tanh): entropy path + squashed Q path.
    const Eigen::ArrayXXd dturn = dq_da.array() * action_half_range_ * (1.0 - tanh_u.square());
    const Eigen::ArrayXXd d_u = (temp * inv_b) * 2.0 * tanh_u + dturn;

    const Eigen::MatrixXd d_mu = d_u.matrix();
    const Eigen::ArrayXXd sigma = s.log_std.array().exp();
    const Eigen::MatrixXd d_log_std =
        ((d_u * s.eps.array() * sigma - temp * inv_b) * s.clamp_mask).matrix();

    *grads = policy_.backward(d_mu, &d_log_std);
    return loss;
}

double SacAgent::update_temperature(const Batch& batch, Rng& update_rng) {
    const PolicySample s = sample_policy(batch.states, update_rng);
    const double grad = -(s.log_prob.array() + target_entropy_).mean();
    log_temperature_ += temp_opt_.step(grad);
    return temperature();
}

void SacAgent::soft_update_targets() {
    soft_update(q1_target_, q1_, hyper_.soft_update_tau);
    soft_update(q2_target_, q2_, hyper_.soft_update_tau);
}

void SacAgent::save(std::ostream& os) const {
    io::write_u64(os, 0x53414341ULL);  // "SACA"
    io::write_u64(os, static_cast<uint64_t>(state_dim_));
    io::write_u64(os, static_cast<uint64_t>(action_dim_));
    io::write_f64(os, action_center_);
    io::write_f64(os, action_half_range_);
    io::write_f64(os, target_entropy_);
    io::write_f64(os, log_temperature_);
    io::write_f64(os, hyper_.discount);
    io::write_f64(os, hyper_.soft_update_tau);
    io::write_u64(os, hyper_.replay_capacity);
    io::write_u64(os, static_cast<uint64_t>(hyper_.batch_size));
    io::write_f64(os, hyper_.actor_lr);
    io::write_f64(os, hyper_.critic_lr);
    io::write_f64(os, hyper_.temperature_lr);
    io::write_u64(os, static_cast<uint64_t>(hyper_.policy_update_freq));
    io::write_u64(os, static_cast<uint64_t>(hyper_.target_update_freq));
    io::write_u64(os, static_cast<uint64_t>(hyper_.burn_in_steps));
    io::write_u64(os, hyper_.hidden_dims.size());
    for (int h : hyper_.hidden_dims) io::write_u64(os, static_cast<uint64_t>(h));
    io::write_f64(os, hyper_.initial_temperature);
    policy_.save(os);
    q1_.save(os);
    q2_.save(os);
    q1_target_.save(os);
    q2_target_.save(os);
    policy_opt_.save(os);
    q1_opt_.save(os);
    q2_opt_.save(os);
    temp_opt_.save(os);
}

SacAgent SacAgent::load(std::istream& is) {
    io::expect_magic(is, 0x53414341ULL, "SacAgent");
    const int state_dim = static_cast<int>(io::read_u64(is));
    const int action_dim = static_cast<int>(io::read_u64(is));
    const double center = io::read_f64(is);
    const double half = io::read_f64(is);
    const double target_entropy = io::read_f64(is);
    const double log_temp = io::read_f64(is);
    SacHyper hyper;
    hyper.discount = io::read_f64(is);
    hyper.soft_update_tau = io::read_f64(is);
    hyper.replay_capacity = io::read_u64(is);
    hyper.batch_size = static_cast<int>(io::read_u64(is));
    hyper.actor_lr = io::read_f64(is);
    hyper.critic_lr = io::read_f64(is);
    hyper.temperature_lr = io::read_f64(is);
    hyper.policy_update_freq = static_cast<int>(io::read_u64(is));
    hyper.target_update_freq = static_cast<int>(io::read_u64(is));
    hyper.burn_in_steps = static_cast<int64_t>(io::read_u64(is));
    hyper.hidden_dims.clear();
    const uint64_t nh = io::read_u64(is);
    for (uint64_t i = 0; i < nh; ++i) hyper.hidden_dims.push_back(static_cast<int>(io::read_u64(is)));
    hyper.initial_temperature = io::read_f64(is);

    Rng scratch(0);
    SacAgent agent(state_dim, action_dim, center - half, center + half, hyper, scratch);
    agent.target_entropy_ = target_entropy;
    agent.log_temperature_ = log_temp;
    agent.policy_ = Mlp::load(is);
    agent.q1_ = Mlp::load(is);
    agent.q2_ = Mlp::load(is);
    agent.q1_target_ = Mlp::load(is);
    agent.q2_target_ = Mlp::load(is);
    agent.policy_opt_.load(is);
    agent.q1_opt_.load(is);
    agent.q2_opt_.load(is);
    agent.temp_opt_.load(is);
    return agent;
}

void classify_and_commit(const std::vector<TrajectoryStep>& trajectory,
                         LabeledStateStore& success_store, LabeledStateStore& failure_store,
                         const RffProjector& projector, const ShapingConfig& cfg,
                         int max_segment_steps, ReplayBuffer* replay, Rng& retention_rng) {
    if (trajectory.empty()) return;

    const auto commit = [&](std::size_t begin, std::size_t end, bool success) {
        std::vector<Eigen::VectorXd> entries;
        entries.reserve(end - begin);
        for (std::size_t t = begin; t < end; ++t) {
            if (cfg.state_action_features) {
                Eigen::VectorXd joint(trajectory[t].state.size() + trajectory[t].action.size());
                joint << trajectory[t].state, trajectory[t].action;
                entries.push_back(std::move(joint));
            } else {
                entries.push_back(trajectory[t].state);
            }
        }
        (success ? success_store : failure_store)
            .record_states(entries, projector, retention_rng);
        if (replay != nullptr) {
            const SuccessFlag flag = success ? SuccessFlag::Success : SuccessFlag::Failure;
            for (std::size_t t = begin; t < end; ++t) replay->set_flag(trajectory[t].slot, flag);
        }
    };

    std::size_t begin = 0;
    for (std::size_t t = 0; t < trajectory.size(); ++t) {
        if (trajectory[t].env_reward > 0.0) {
            const std::size_t length = t - begin + 1;
            commit(begin, t + 1, length <= static_cast<std::size_t>(max_segment_steps));
            begin = t + 1;
        }
    }
    if (begin < trajectory.size()) commit(begin, trajectory.size(), false);
}

}  // namespace sasr
