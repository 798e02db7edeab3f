#include "sasr/trainer.hpp"

#include <cmath>
#include <stdexcept>

#include "sasr/serialize.hpp"

namespace sasr {

void TrainConfig::validate() const {
    sac.validate();
    shaping.validate();
    if (total_steps < 1) throw std::invalid_argument("TrainConfig: total_steps must be >= 1");
    if (eval_interval < 1) throw std::invalid_argument("TrainConfig: eval_interval must be >= 1");
    if (eval_episodes < 1) throw std::invalid_argument("TrainConfig: eval_episodes must be >= 1");
    if (reward_bin_grid < 1) throw std::invalid_argument("TrainConfig: reward_bin_grid must be >= 1");
    if (bandwidth_final < 0.0) throw std::invalid_argument("TrainConfig: bandwidth_final must be >= 0");
    if (bandwidth_final > 0.0 && shaping.kernel != KernelKind::Gaussian) {
        throw std::invalid_argument("TrainConfig: bandwidth schedules need the Gaussian kernel");
    }
    if (reprojection_interval < 1) {
        throw std::invalid_argument("TrainConfig: reprojection_interval must be >= 1");
    }
    if (max_segment_steps < 0) throw std::invalid_argument("TrainConfig: max_segment_steps must be >= 0");
}

RewardBinLog::RewardBinLog(int grid, Eigen::VectorXd lo, Eigen::VectorXd hi, int64_t window_steps)
    : grid_(grid), lo_(std::move(lo)), hi_(std::move(hi)), window_steps_(window_steps) {
    if (grid < 1) throw std::invalid_argument("RewardBinLog: grid must be >= 1");
    if (lo_.size() != hi_.size() || lo_.size() < 1 || lo_.size() > 2) {
        throw std::invalid_argument("RewardBinLog: supports 1- or 2-dimensional states");
    }
    if (window_steps < 1) throw std::invalid_argument("RewardBinLog: window_steps must be >= 1");
}

int RewardBinLog::num_bins() const {
    return lo_.size() == 2 ? grid_ * grid_ : grid_;
}

int RewardBinLog::bin_of(const Eigen::Ref<const Eigen::VectorXd>& state) const {
    int index = 0;
    for (Eigen::Index d = 0; d < lo_.size(); ++d) {
        const double span = hi_(d) - lo_(d);
        int b = static_cast<int>((state(d) - lo_(d)) / span * grid_);
        b = std::min(std::max(b, 0), grid_ - 1);
        index = index * grid_ + b;
    }
    return index;
}

void RewardBinLog::add(int64_t step, const Eigen::Ref<const Eigen::VectorXd>& state, double value) {
    const auto w = static_cast<std::size_t>((step - 1) / window_steps_);
    while (windows_.size() <= w) {
        windows_.emplace_back(static_cast<std::size_t>(num_bins()));
    }
    windows_[w][static_cast<std::size_t>(bin_of(state))].add(value);
}

const RunningStats& RewardBinLog::at(int window, int bin) const {
    return windows_[static_cast<std::size_t>(window)][static_cast<std::size_t>(bin)];
}

RunningStats RewardBinLog::pooled(int window_begin, int window_end, int bin) const {
    RunningStats out;
    for (int w = window_begin; w < window_end && w < num_windows(); ++w) {
        out.merge(at(w, bin));
    }
    return out;
}

std::vector<uint64_t> RewardBinLog::counts_per_bin() const {
    std::vector<uint64_t> counts(static_cast<std::size_t>(num_bins()), 0);
    for (const auto& window : windows_) {
        for (std::size_t b = 0; b < window.size(); ++b) counts[b] += window[b].count;
    }
    return counts;
}

void RewardBinLog::save(std::ostream& os) const {
    io::write_u64(os, static_cast<uint64_t>(grid_));
    io::write_vector(os, lo_);
    io::write_vector(os, hi_);
    io::write_u64(os, static_cast<uint64_t>(window_steps_));
    io::write_u64(os, windows_.size());
    for (const auto& window : windows_) {
        io::write_u64(os, window.size());
        for (const auto& st : window) {
            io::write_u64(os, st.count);
            io::write_f64(os, st.mean);
            io::write_f64(os, st.m2);
        }
    }
}

RewardBinLog RewardBinLog::load(std::istream& is) {
    RewardBinLog log;
    log.grid_ = static_cast<int>(io::read_u64(is));
    log.lo_ = io::read_vector(is);
    log.hi_ = io::read_vector(is);
    log.window_steps_ = static_cast<int64_t>(io::read_u64(is));
    const uint64_t nw = io::read_u64(is);
    log.windows_.resize(nw);
    for (auto& window : log.windows_) {
        window.resize(io::read_u64(is));
        for (auto& st : window) {
            st.count = io::read_u64(is);
            st.mean = io::read_f64(is);
            st.m2 = io::read_f64(is);
        }
    }
    return log;
}

std::pair<double, double> evaluate_policy(SacAgent& agent, Env& env, int episodes, Rng& rng) {
    if (episodes < 1) throw std::invalid_argument("evaluate_policy: episodes must be >= 1");
    std::vector<double> returns(static_cast<std::size_t>(episodes), 0.0);
    for (int e = 0; e < episodes; ++e) {
        Eigen::VectorXd s = env.reset(rng.next_u64());
        double total = 0.0;
        for (;;) {
            const Eigen::VectorXd a = agent.select_action(s, /*stochastic=*/false, rng);
            const StepResult r = env.step(a);
            total += r.reward;
            if (r.terminated || r.truncated) break;
            s = r.next_state;
        }
        returns[static_cast<std::size_t>(e)] = total;
    }
    return {vector_mean(returns), vector_stderr(returns)};
}

Trainer::Trainer(std::unique_ptr<Env> env, std::unique_ptr<Env> eval_env)
    : env_(std::move(env)), eval_env_(std::move(eval_env)) {}

Trainer::Trainer(std::unique_ptr<Env> env, std::unique_ptr<Env> eval_env, TrainConfig cfg,
                 uint64_t seed)
    : cfg_(std::move(cfg)), seed_(seed), env_(std::move(env)), eval_env_(std::move(eval_env)) {
    cfg_.validate();
    init_from_config();
}

void Trainer::init_from_config() {
    env_rng_ = Rng::stream(seed_, RngStream::Env);
    action_rng_ = Rng::stream(seed_, RngStream::Action);
    replay_rng_ = Rng::stream(seed_, RngStream::Replay);
    update_rng_ = Rng::stream(seed_, RngStream::UpdateNoise);
    retention_rng_ = Rng::stream(seed_, RngStream::Retention);
    beta_rng_ = Rng::stream(seed_, RngStream::BetaSampling);
    eval_rng_ = Rng::stream(seed_, RngStream::Eval);

    Rng init_rng = Rng::stream(seed_, RngStream::NetInit);
    agent_ = std::make_unique<SacAgent>(env_->state_dim(), env_->action_dim(), env_->action_low(),
                                        env_->action_high(), cfg_.sac, init_rng);
    replay_ = std::make_unique<ReplayBuffer>(cfg_.sac.replay_capacity, env_->state_dim(),
                                             env_->action_dim());

    if (!cfg_.disable_shaping) {
        const int proj_dim = cfg_.shaping.state_action_features
                                 ? env_->state_dim() + env_->action_dim()
                                 : env_->state_dim();
        projector_ = std::make_unique<RffProjector>(proj_dim, cfg_.shaping.feature_dim,
                                                    cfg_.shaping.bandwidth, cfg_.shaping.kernel,
                                                    seed_);
        const bool keep_raw = cfg_.oracle_keep_raw || cfg_.bandwidth_final > 0.0;
        success_ = std::make_unique<LabeledStateStore>(StoreLabel::Success,
                                                       cfg_.shaping.retention_rate,
                                                       cfg_.shaping.feature_dim, keep_raw);
        failure_ = std::make_unique<LabeledStateStore>(StoreLabel::Failure,
                                                       cfg_.shaping.retention_rate,
                                                       cfg_.shaping.feature_dim, keep_raw);
    }

    max_segment_steps_ =
        cfg_.max_segment_steps > 0 ? cfg_.max_segment_steps : env_->max_episode_steps();
    reward_bins_ = RewardBinLog(cfg_.reward_bin_grid, env_->state_low(), env_->state_high(),
                                cfg_.eval_interval);
}

ShapingContext Trainer::shaping_context() const {
    ShapingContext ctx;
    if (!cfg_.disable_shaping) {
        ctx.success_store = success_.get();
        ctx.failure_store = failure_.get();
        ctx.projector = projector_.get();
        ctx.config = &cfg_.shaping;
    }
    return ctx;
}

bool Trainer::finished() const { return step_ >= cfg_.total_steps || stopped_early_; }

void Trainer::run() {
    while (!finished()) step_once();
}

void Trainer::step_once() {
    if (finished()) return;

    if (env_needs_reset_) {
        state_ = env_->reset(env_rng_.next_u64());
        trajectory_.clear();
        env_needs_reset_ = false;
    }

    const Eigen::VectorXd action = agent_->select_action(state_, /*stochastic=*/true, action_rng_);
    const StepResult result = env_->step(action);
    const ReplayBuffer::SlotRef slot =
        replay_->add(state_, action, result.reward, result.next_state, result.terminated);
    trajectory_.push_back({state_, action, result.reward, slot});
    if (cfg_.log_visited_states) {
        for (Eigen::Index d = 0; d < state_.size(); ++d) visited_.push_back(state_(d));
    }
    ++step_;

    if (result.terminated || result.truncated) {
        if (!cfg_.disable_shaping) {
            classify_and_commit(trajectory_, *success_, *failure_, *projector_, cfg_.shaping,
                                max_segment_steps_, replay_.get(), retention_rng_);
        }
        trajectory_.clear();
        env_needs_reset_ = true;
    } else {
        state_ = result.next_state;
    }

    if (step_ > cfg_.sac.burn_in_steps) {
        replay_->sample_indices(static_cast<std::size_t>(cfg_.sac.batch_size), replay_rng_,
                                batch_indices_);
        replay_->gather(batch_indices_, batch_.states, batch_.actions, batch_.env_rewards,
                        batch_.next_states, batch_.terminated);

        CriticStats stats;
        agent_->update_critics(batch_, shaping_context(), update_rng_, beta_rng_, &stats);
        if (stats.shaped.size() > 0) {
            for (Eigen::Index i = 0; i < stats.shaped.size(); ++i) {
                reward_bins_.add(step_, batch_.states.row(i).transpose(), stats.shaped(i));
                window_shaped_.add(stats.shaped(i));
            }
            window_alpha_sum_ += stats.alpha_mean;
            window_beta_sum_ += stats.beta_mean;
            ++window_updates_;
        }

        if (step_ % cfg_.sac.policy_update_freq == 0) {
            agent_->update_policy(batch_, update_rng_);
            agent_->update_temperature(batch_, update_rng_);
        }
        if (step_ % cfg_.sac.target_update_freq == 0) {
            agent_->soft_update_targets();
        }
    }

    if (step_ % cfg_.eval_interval == 0 || step_ == cfg_.total_steps) {
        evaluate_and_log();
    }

    maybe_reproject();
}

void Trainer::evaluate_and_log() {
    const auto [mean, se] = evaluate_policy(*agent_, *eval_env_, cfg_.eval_episodes, eval_rng_);
    EvalPoint p;
    p.step = step_;
    p.mean_return = mean;
    p.stderr_return = se;
    p.shaped_mean = window_shaped_.mean;
    p.shaped_var = window_shaped_.variance();
    p.alpha_mean = window_updates_ > 0 ? window_alpha_sum_ / static_cast<double>(window_updates_) : 0.0;
    p.beta_mean = window_updates_ > 0 ? window_beta_sum_ / static_cast<double>(window_updates_) : 0.0;
    p.success_store_size = success_ ? success_->retained_count() : 0;
    p.failure_store_size = failure_ ? failure_->retained_count() : 0;
    curve_.push_back(p);

    window_shaped_ = RunningStats{};
    window_alpha_sum_ = window_beta_sum_ = 0.0;
    window_updates_ = 0;

    if (mean >= cfg_.early_stop_return) stopped_early_ = true;
}

void Trainer::maybe_reproject() {
    if (cfg_.bandwidth_final <= 0.0 || cfg_.disable_shaping) return;
    if (step_ % cfg_.reprojection_interval != 0 || step_ >= cfg_.total_steps) return;
    const double frac = static_cast<double>(step_) / static_cast<double>(cfg_.total_steps);
    const double h = cfg_.shaping.bandwidth + frac * (cfg_.bandwidth_final - cfg_.shaping.bandwidth);
    projector_ = std::make_unique<RffProjector>(projector_->with_bandwidth(h));
    success_->reproject(*projector_);
    failure_->reproject(*projector_);
}

double Trainer::last_eval_mean() const {
    if (curve_.empty()) throw std::logic_error("Trainer: no evaluations recorded");
    return curve_.back().mean_return;
}

namespace {

constexpr uint64_t kTrainerMagic = 0x5341535254524eULL;

void write_train_config(std::ostream& os, const TrainConfig& cfg) {
    io::write_f64(os, cfg.sac.discount);
    io::write_f64(os, cfg.sac.soft_update_tau);
    io::write_u64(os, cfg.sac.replay_capacity);
    io::write_u64(os, static_cast<uint64_t>(cfg.sac.batch_size));
    io::write_f64(os, cfg.sac.actor_lr);
    io::write_f64(os, cfg.sac.critic_lr);
    io::write_f64(os, cfg.sac.temperature_lr);
    io::write_u64(os, static_cast<uint64_t>(cfg.sac.policy_update_freq));
    io::write_u64(os, static_cast<uint64_t>(cfg.sac.target_update_freq));
    io::write_u64(os, static_cast<uint64_t>(cfg.sac.burn_in_steps));
    io::write_u64(os, cfg.sac.hidden_dims.size());
    for (int h : cfg.sac.hidden_dims) io::write_u64(os, static_cast<uint64_t>(h));
    io::write_f64(os, cfg.sac.initial_temperature);

    io::write_f64(os, cfg.shaping.lambda_weight);
    io::write_f64(os, cfg.shaping.r_min);
    io::write_f64(os, cfg.shaping.r_max);
    io::write_f64(os, cfg.shaping.retention_rate);
    io::write_f64(os, cfg.shaping.bandwidth);
    io::write_u64(os, static_cast<uint64_t>(cfg.shaping.feature_dim));
    io::write_u64(os, static_cast<uint64_t>(cfg.shaping.kernel));
    io::write_u64(os, cfg.shaping.sample_from_beta ? 1 : 0);
    io::write_u64(os, cfg.shaping.state_action_features ? 1 : 0);

    io::write_u64(os, static_cast<uint64_t>(cfg.total_steps));
    io::write_u64(os, static_cast<uint64_t>(cfg.eval_interval));
    io::write_u64(os, static_cast<uint64_t>(cfg.eval_episodes));
    io::write_f64(os, cfg.early_stop_return);
    io::write_u64(os, cfg.log_visited_states ? 1 : 0);
    io::write_u64(os, static_cast<uint64_t>(cfg.reward_bin_grid));
    io::write_u64(os, cfg.oracle_keep_raw ? 1 : 0);
    io::write_f64(os, cfg.bandwidth_final);
    io::write_u64(os, static_cast<uint64_t>(cfg.reprojection_interval));
    io::write_u64(os, static_cast<uint64_t>(cfg.max_segment_steps));
    io::write_u64(os, cfg.disable_shaping ? 1 : 0);
}

TrainConfig read_train_config(std::istream& is) {
    TrainConfig cfg;
    cfg.sac.discount = io::read_f64(is);
    cfg.sac.soft_update_tau = io::read_f64(is);
    cfg.sac.replay_capacity = io::read_u64(is);
    cfg.sac.batch_size = static_cast<int>(io::read_u64(is));
    cfg.sac.actor_lr = io::read_f64(is);
    cfg.sac.critic_lr = io::read_f64(is);
    cfg.sac.temperature_lr = io::read_f64(is);
    cfg.sac.policy_update_freq = static_cast<int>(io::read_u64(is));
    cfg.sac.target_update_freq = static_cast<int>(io::read_u64(is));
    cfg.sac.burn_in_steps = static_cast<int64_t>(io::read_u64(is));
    cfg.sac.hidden_dims.clear();
    const uint64_t nh = io::read_u64(is);
    for (uint64_t i = 0; i < nh; ++i) {
        cfg.sac.hidden_dims.push_back(static_cast<int>(io::read_u64(is)));
    }
    cfg.sac.initial_temperature = io::read_f64(is);

    cfg.shaping.lambda_weight = io::read_f64(is);
    cfg.shaping.r_min = io::read_f64(is);
    cfg.shaping.r_max = io::read_f64(is);
    cfg.shaping.retention_rate = io::read_f64(is);
    cfg.shaping.bandwidth = io::read_f64(is);
    cfg.shaping.feature_dim = static_cast<int>(io::read_u64(is));
    cfg.shaping.kernel = static_cast<KernelKind>(io::read_u64(is));
    cfg.shaping.sample_from_beta = io::read_u64(is) != 0;
    cfg.shaping.state_action_features = io::read_u64(is) != 0;

    cfg.total_steps = static_cast<int64_t>(io::read_u64(is));
    cfg.eval_interval = static_cast<int64_t>(io::read_u64(is));
    cfg.eval_episodes = static_cast<int>(io::read_u64(is));
    cfg.early_stop_return = io::read_f64(is);
    cfg.log_visited_states = io::read_u64(is) != 0;
    cfg.reward_bin_grid = static_cast<int>(io::read_u64(is));
    cfg.oracle_keep_raw = io::read_u64(is) != 0;
    cfg.bandwidth_final = io::read_f64(is);
    cfg.reprojection_interval = static_cast<int64_t>(io::read_u64(is));
    cfg.max_segment_steps = static_cast<int>(io::read_u64(is));
    cfg.disable_shaping = io::read_u64(is) != 0;
    return cfg;
}

void write_rng(std::ostream& os, const Rng& rng) { io::write_string(os, rng.state_string()); }

Rng read_rng(std::istream& is) {
    Rng rng(0);
    rng.set_state_string(io::read_string(is));
    return rng;
}

}  // namespace

void Trainer::save(std::ostream& os) const {
    io::write_u64(os, kTrainerMagic);
    write_train_config(os, cfg_);
    io::write_u64(os, seed_);
    io::write_u64(os, static_cast<uint64_t>(step_));
    io::write_u64(os, env_needs_reset_ ? 1 : 0);
    io::write_u64(os, stopped_early_ ? 1 : 0);
    io::write_u64(os, static_cast<uint64_t>(max_segment_steps_));
    io::write_vector(os, env_needs_reset_ ? Eigen::VectorXd::Zero(env_->state_dim()).eval()
                                          : state_);
    env_->save_state(os);

    io::write_u64(os, trajectory_.size());
    for (const auto& t : trajectory_) {
        io::write_vector(os, t.state);
        io::write_vector(os, t.action);
        io::write_f64(os, t.env_reward);
        io::write_u64(os, t.slot.index);
        io::write_u64(os, t.slot.ticket);
    }

    write_rng(os, env_rng_);
    write_rng(os, action_rng_);
    write_rng(os, replay_rng_);
    write_rng(os, update_rng_);
    write_rng(os, retention_rng_);
    write_rng(os, beta_rng_);
    write_rng(os, eval_rng_);

    agent_->save(os);
    replay_->save(os);

    io::write_u64(os, cfg_.disable_shaping ? 0 : 1);
    if (!cfg_.disable_shaping) {
        projector_->save(os);
        success_->save(os);
        failure_->save(os);
        io::write_u64(os, success_->keeps_raw_states() ? 1 : 0);
        if (success_->keeps_raw_states()) {
            for (const LabeledStateStore* store : {success_.get(), failure_.get()}) {
                io::write_u64(os, store->raw_states().size());
                for (const auto& s : store->raw_states()) io::write_vector(os, s);
            }
        }
    }

    io::write_u64(os, curve_.size());
    for (const auto& p : curve_) {
        io::write_u64(os, static_cast<uint64_t>(p.step));
        io::write_f64(os, p.mean_return);
        io::write_f64(os, p.stderr_return);
        io::write_f64(os, p.shaped_mean);
        io::write_f64(os, p.shaped_var);
        io::write_f64(os, p.alpha_mean);
        io::write_f64(os, p.beta_mean);
        io::write_u64(os, p.success_store_size);
        io::write_u64(os, p.failure_store_size);
    }

    reward_bins_.save(os);
    io::write_u64(os, window_shaped_.count);
    io::write_f64(os, window_shaped_.mean);
    io::write_f64(os, window_shaped_.m2);
    io::write_f64(os, window_alpha_sum_);
    io::write_f64(os, window_beta_sum_);
    io::write_u64(os, window_updates_);

    io::write_u64(os, visited_.size());
    io::write_f64_array(os, visited_.data(), visited_.size());
}

Trainer Trainer::load(std::istream& is, std::unique_ptr<Env> env, std::unique_ptr<Env> eval_env) {
    io::expect_magic(is, kTrainerMagic, "Trainer");
    Trainer t(std::move(env), std::move(eval_env));
    t.cfg_ = read_train_config(is);
    t.seed_ = io::read_u64(is);
    t.step_ = static_cast<int64_t>(io::read_u64(is));
    t.env_needs_reset_ = io::read_u64(is) != 0;
    t.stopped_early_ = io::read_u64(is) != 0;
    t.max_segment_steps_ = static_cast<int>(io::read_u64(is));
    t.state_ = io::read_vector(is);
    t.env_->load_state(is);

    const uint64_t traj_n = io::read_u64(is);
    t.trajectory_.resize(traj_n);
    for (auto& step : t.trajectory_) {
        step.state = io::read_vector(is);
        step.action = io::read_vector(is);
        step.env_reward = io::read_f64(is);
        step.slot.index = io::read_u64(is);
        step.slot.ticket = io::read_u64(is);
    }

    t.env_rng_ = read_rng(is);
    t.action_rng_ = read_rng(is);
    t.replay_rng_ = read_rng(is);
    t.update_rng_ = read_rng(is);
    t.retention_rng_ = read_rng(is);
    t.beta_rng_ = read_rng(is);
    t.eval_rng_ = read_rng(is);

    t.agent_ = std::make_unique<SacAgent>(SacAgent::load(is));
    t.replay_ = std::make_unique<ReplayBuffer>(ReplayBuffer::load(is));

    if (io::read_u64(is) != 0) {
        t.projector_ = std::make_unique<RffProjector>(RffProjector::load(is));
        t.success_ = std::make_unique<LabeledStateStore>(LabeledStateStore::load(is));
        t.failure_ = std::make_unique<LabeledStateStore>(LabeledStateStore::load(is));
        if (io::read_u64(is) != 0) {
            for (LabeledStateStore* store : {t.success_.get(), t.failure_.get()}) {
                const uint64_t n = io::read_u64(is);
                std::vector<Eigen::VectorXd> raws(n);
                for (auto& r : raws) r = io::read_vector(is);
                store->attach_raw_states(std::move(raws));
            }
        }
    }

    const uint64_t curve_n = io::read_u64(is);
    t.curve_.resize(curve_n);
    for (auto& p : t.curve_) {
        p.step = static_cast<int64_t>(io::read_u64(is));
        p.mean_return = io::read_f64(is);
        p.stderr_return = io::read_f64(is);
        p.shaped_mean = io::read_f64(is);
        p.shaped_var = io::read_f64(is);
        p.alpha_mean = io::read_f64(is);
        p.beta_mean = io::read_f64(is);
        p.success_store_size = io::read_u64(is);
        p.failure_store_size = io::read_u64(is);
    }

    t.reward_bins_ = RewardBinLog::load(is);
    t.window_shaped_.count = io::read_u64(is);
    t.window_shaped_.mean = io::read_f64(is);
    t.window_shaped_.m2 = io::read_f64(is);
    t.window_alpha_sum_ = io::read_f64(is);
    t.window_beta_sum_ = io::read_f64(is);
    t.window_updates_ = io::read_u64(is);

    const uint64_t visited_n = io::read_u64(is);
    t.visited_.resize(visited_n);
    io::read_f64_array(is, t.visited_.data(), visited_n);
    return t;
}

}  // namespace sasr
