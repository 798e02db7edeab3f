#include "sasr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sasr/mathutil.hpp"
#include "sasr/serialize.hpp"

namespace fs = std::filesystem;

namespace sasr {
namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return d;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': bad number '" + value + "'");
    }
}

int64_t parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const int64_t v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': bad integer '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw std::invalid_argument("config key '" + key + "': bad boolean '" + value + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

void run_seeds_parallel(const std::vector<uint64_t>& seeds, int workers,
                        const std::function<void(uint64_t)>& fn) {
    int n = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    n = std::min<int>(n, static_cast<int>(seeds.size()));

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(seeds.size());
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= seeds.size()) return;
            try {
                fn(seeds[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
}

}  // namespace

void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    TrainConfig& t = cfg.train;
    if (key == "env") {
        if (value != "mountain-car" && value != "sparse-chain") {
            throw std::invalid_argument("config key 'env': unknown environment '" + value + "'");
        }
        cfg.env_name = value;
    } else if (key == "chain_length") {
        cfg.chain_length = static_cast<int>(parse_int(key, value));
    } else if (key == "seeds") {
        cfg.seeds.clear();
        if (value.find(',') == std::string::npos) {
            const int64_t n = parse_int(key, value);
            if (n < 1) throw std::invalid_argument("config key 'seeds': count must be >= 1");
            for (int64_t i = 0; i < n; ++i) cfg.seeds.push_back(static_cast<uint64_t>(i));
        } else {
            for (const auto& part : split(value, ',')) {
                cfg.seeds.push_back(static_cast<uint64_t>(parse_int(key, trim(part))));
            }
        }
    } else if (key == "out_dir") {
        cfg.out_dir = value;
    } else if (key == "workers") {
        cfg.workers = static_cast<int>(parse_int(key, value));
    } else if (key == "save_checkpoint") {
        cfg.save_checkpoint = parse_bool(key, value);
    } else if (key == "log_density") {
        cfg.log_density = parse_bool(key, value);
    } else if (key == "total_steps") {
        t.total_steps = parse_int(key, value);
    } else if (key == "eval_interval") {
        t.eval_interval = parse_int(key, value);
    } else if (key == "eval_episodes") {
        t.eval_episodes = static_cast<int>(parse_int(key, value));
    } else if (key == "early_stop_return") {
        t.early_stop_return = value == "inf" ? std::numeric_limits<double>::infinity()
                                             : parse_double(key, value);
    } else if (key == "lambda") {
        t.shaping.lambda_weight = parse_double(key, value);
    } else if (key == "r_min") {
        t.shaping.r_min = parse_double(key, value);
    } else if (key == "r_max") {
        t.shaping.r_max = parse_double(key, value);
    } else if (key == "phi") {
        t.shaping.retention_rate = parse_double(key, value);
    } else if (key == "bandwidth") {
        t.shaping.bandwidth = parse_double(key, value);
    } else if (key == "bandwidth_final") {
        t.bandwidth_final = parse_double(key, value);
    } else if (key == "reprojection_interval") {
        t.reprojection_interval = parse_int(key, value);
    } else if (key == "rff_dim") {
        t.shaping.feature_dim = static_cast<int>(parse_int(key, value));
    } else if (key == "kernel") {
        try {
            t.shaping.kernel = kernel_from_string(value);
        } catch (const std::exception&) {
            throw std::invalid_argument("config key 'kernel': unknown kernel '" + value + "'");
        }
    } else if (key == "beta_sampling") {
        t.shaping.sample_from_beta = parse_bool(key, value);
    } else if (key == "state_action_features") {
        t.shaping.state_action_features = parse_bool(key, value);
    } else if (key == "oracle_keep_raw") {
        t.oracle_keep_raw = parse_bool(key, value);
    } else if (key == "max_segment_steps") {
        t.max_segment_steps = static_cast<int>(parse_int(key, value));
    } else if (key == "disable_shaping") {
        t.disable_shaping = parse_bool(key, value);
    } else if (key == "reward_bin_grid") {
        t.reward_bin_grid = static_cast<int>(parse_int(key, value));
    } else if (key == "gamma") {
        t.sac.discount = parse_double(key, value);
    } else if (key == "tau") {
        t.sac.soft_update_tau = parse_double(key, value);
    } else if (key == "replay_capacity") {
        t.sac.replay_capacity = static_cast<std::size_t>(parse_int(key, value));
    } else if (key == "batch_size") {
        t.sac.batch_size = static_cast<int>(parse_int(key, value));
    } else if (key == "actor_lr") {
        t.sac.actor_lr = parse_double(key, value);
    } else if (key == "critic_lr") {
        t.sac.critic_lr = parse_double(key, value);
    } else if (key == "temperature_lr") {
        t.sac.temperature_lr = parse_double(key, value);
    } else if (key == "policy_update_freq") {
        t.sac.policy_update_freq = static_cast<int>(parse_int(key, value));
    } else if (key == "target_update_freq") {
        t.sac.target_update_freq = static_cast<int>(parse_int(key, value));
    } else if (key == "burn_in_steps") {
        t.sac.burn_in_steps = parse_int(key, value);
    } else if (key == "hidden_dims") {
        t.sac.hidden_dims.clear();
        for (const auto& part : split(value, ',')) {
            t.sac.hidden_dims.push_back(static_cast<int>(parse_int(key, trim(part))));
        }
    } else if (key == "initial_temperature") {
        t.sac.initial_temperature = parse_double(key, value);
    } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line.substr(0, line.find('#')));
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key=value");
        }
        apply_key_value(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
    return cfg;
}

std::string config_to_text(const RunConfig& cfg) {
    const TrainConfig& t = cfg.train;
    std::ostringstream os;
    os << "env = " << cfg.env_name << "\n";
    os << "chain_length = " << cfg.chain_length << "\n";
    os << "seeds = ";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        os << (i ? "," : "") << cfg.seeds[i];
    }
    os << "\n";
    os << "out_dir = " << cfg.out_dir << "\n";
    os << "workers = " << cfg.workers << "\n";
    os << "save_checkpoint = " << (cfg.save_checkpoint ? 1 : 0) << "\n";
    os << "log_density = " << (cfg.log_density ? 1 : 0) << "\n";
    os << "total_steps = " << t.total_steps << "\n";
    os << "eval_interval = " << t.eval_interval << "\n";
    os << "eval_episodes = " << t.eval_episodes << "\n";
    os << "early_stop_return = "
       << (std::isinf(t.early_stop_return) ? "inf" : fmt_double(t.early_stop_return)) << "\n";
    os << "lambda = " << fmt_double(t.shaping.lambda_weight) << "\n";
    os << "r_min = " << fmt_double(t.shaping.r_min) << "\n";
    os << "r_max = " << fmt_double(t.shaping.r_max) << "\n";
    os << "phi = " << fmt_double(t.shaping.retention_rate) << "\n";
    os << "bandwidth = " << fmt_double(t.shaping.bandwidth) << "\n";
    os << "bandwidth_final = " << fmt_double(t.bandwidth_final) << "\n";
    os << "reprojection_interval = " << t.reprojection_interval << "\n";
    os << "rff_dim = " << t.shaping.feature_dim << "\n";
    os << "kernel = " << to_string(t.shaping.kernel) << "\n";
    os << "beta_sampling = " << (t.shaping.sample_from_beta ? 1 : 0) << "\n";
    os << "state_action_features = " << (t.shaping.state_action_features ? 1 : 0) << "\n";
    os << "oracle_keep_raw = " << (t.oracle_keep_raw ? 1 : 0) << "\n";
    os << "max_segment_steps = " << t.max_segment_steps << "\n";
    os << "disable_shaping = " << (t.disable_shaping ? 1 : 0) << "\n";
    os << "reward_bin_grid = " << t.reward_bin_grid << "\n";
    os << "gamma = " << fmt_double(t.sac.discount) << "\n";
    os << "tau = " << fmt_double(t.sac.soft_update_tau) << "\n";
    os << "replay_capacity = " << t.sac.replay_capacity << "\n";
    os << "batch_size = " << t.sac.batch_size << "\n";
    os << "actor_lr = " << fmt_double(t.sac.actor_lr) << "\n";
    os << "critic_lr = " << fmt_double(t.sac.critic_lr) << "\n";
    os << "temperature_lr = " << fmt_double(t.sac.temperature_lr) << "\n";
    os << "policy_update_freq = " << t.sac.policy_update_freq << "\n";
    os << "target_update_freq = " << t.sac.target_update_freq << "\n";
    os << "burn_in_steps = " << t.sac.burn_in_steps << "\n";
    os << "hidden_dims = ";
    for (std::size_t i = 0; i < t.sac.hidden_dims.size(); ++i) {
        os << (i ? "," : "") << t.sac.hidden_dims[i];
    }
    os << "\n";
    os << "initial_temperature = " << fmt_double(t.sac.initial_temperature) << "\n";
    return os.str();
}

void save_config_file(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << config_to_text(cfg);
}

std::unique_ptr<Env> make_env_from_config(const RunConfig& cfg) {
    return make_env(cfg.env_name, cfg.chain_length);
}

bool SeedResult::reached(double threshold) const {
    return std::any_of(curve.begin(), curve.end(),
                       [&](const EvalPoint& p) { return p.mean_return >= threshold; });
}

std::string write_train_csv(const std::string& out_dir, uint64_t seed,
                            const std::vector<EvalPoint>& curve) {
    fs::create_directories(out_dir);
    const std::string path = out_dir + "/train_seed" + std::to_string(seed) + ".csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# sasr-train-csv v1\n";
    out << "step,eval_mean_return,eval_stderr,shaped_reward_mean,shaped_reward_var,"
           "mean_alpha,mean_beta,success_store_size,failure_store_size\n";
    for (const auto& p : curve) {
        out << p.step << ',' << fmt_double(p.mean_return) << ',' << fmt_double(p.stderr_return)
            << ',' << fmt_double(p.shaped_mean) << ',' << fmt_double(p.shaped_var) << ','
            << fmt_double(p.alpha_mean) << ',' << fmt_double(p.beta_mean) << ','
            << p.success_store_size << ',' << p.failure_store_size << '\n';
    }
    return path;
}

namespace {

void write_reward_bins_csv(const std::string& path, const RewardBinLog& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# sasr-reward-bins-csv v1\n";
    out << "window,bin,count,mean,variance\n";
    for (int w = 0; w < log.num_windows(); ++w) {
        for (int b = 0; b < log.num_bins(); ++b) {
            const RunningStats& st = log.at(w, b);
            if (st.count == 0) continue;
            out << w << ',' << b << ',' << st.count << ',' << fmt_double(st.mean) << ','
                << fmt_double(st.variance()) << '\n';
        }
    }
}

}  // namespace

std::vector<SeedResult> run_training(const RunConfig& cfg) {
    cfg.train.validate();
    if (cfg.seeds.empty()) throw std::invalid_argument("run_training: no seeds given");
    fs::create_directories(cfg.out_dir);

    std::vector<SeedResult> results(cfg.seeds.size());
    run_seeds_parallel(cfg.seeds, cfg.workers, [&](uint64_t seed) {
        Trainer trainer(make_env_from_config(cfg), make_env_from_config(cfg), cfg.train, seed);
        trainer.run();

        SeedResult r;
        r.seed = seed;
        r.curve = trainer.curve();
        r.csv_path = write_train_csv(cfg.out_dir, seed, trainer.curve());
        std::vector<double> means;
        for (const auto& p : r.curve) means.push_back(p.mean_return);
        r.curve_mean = vector_mean(means);
        r.final_return = r.curve.empty() ? 0.0 : r.curve.back().mean_return;

        if (cfg.save_checkpoint) {
            r.checkpoint_path = cfg.out_dir + "/checkpoint_seed" + std::to_string(seed) + ".bin";
            save_checkpoint(r.checkpoint_path, cfg, trainer);
        }
        if (cfg.log_density) {
            r.states_path = cfg.out_dir + "/states_seed" + std::to_string(seed) + ".bin";
            write_states_file(r.states_path, trainer.visited_flat(), trainer.state_dim(),
                              trainer.env().state_low(), trainer.env().state_high());
            write_reward_bins_csv(
                cfg.out_dir + "/reward_bins_seed" + std::to_string(seed) + ".csv",
                trainer.reward_bins());
        }

        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
            if (cfg.seeds[i] == seed) results[i] = std::move(r);
        }
    });
    return results;
}

namespace {
constexpr uint64_t kCheckpointMagic = 0x53415352434b50ULL;
}

void save_checkpoint(const std::string& path, const RunConfig& cfg, const Trainer& trainer) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    io::write_u64(out, kCheckpointMagic);
    io::write_string(out, cfg.env_name);
    io::write_u64(out, static_cast<uint64_t>(cfg.chain_length));
    trainer.save(out);
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    io::expect_magic(in, kCheckpointMagic, "checkpoint");
    LoadedCheckpoint loaded;
    loaded.config.env_name = io::read_string(in);
    loaded.config.chain_length = static_cast<int>(io::read_u64(in));
    loaded.trainer = std::make_unique<Trainer>(
        Trainer::load(in, make_env_from_config(loaded.config), make_env_from_config(loaded.config)));
    loaded.config.train = loaded.trainer->config();
    return loaded;
}

std::pair<double, double> run_eval(const std::string& checkpoint_path, int episodes,
                                   const std::string& out_csv) {
    if (episodes < 1) throw std::invalid_argument("run_eval: episodes must be >= 1");
    LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
    auto env = make_env_from_config(loaded.config);
    Rng rng = Rng::stream(loaded.trainer->seed(), RngStream::Eval);
    const auto [mean, se] = evaluate_policy(loaded.trainer->agent(), *env, episodes, rng);
    if (!out_csv.empty()) {
        std::ofstream out(out_csv);
        if (!out) throw std::runtime_error("cannot write " + out_csv);
        out << "# sasr-eval-csv v1\n";
        out << "episodes,mean_return,stderr\n";
        out << episodes << ',' << fmt_double(mean) << ',' << fmt_double(se) << '\n';
    }
    return {mean, se};
}

std::vector<std::string> ablation_cells(const std::string& study) {
    if (study == "beta-sampling") return {"sampling", "no-sampling"};
    if (study == "state-action") return {"state", "state-action"};
    if (study == "retention") return {"1", "0.1", "0.01"};
    if (study == "rff-dim") return {"50", "500", "1000", "2000"};
    if (study == "lambda") return {"0.2", "0.4", "0.6", "0.8", "1.0"};
    if (study == "bandwidth") return {"0.01", "0.1", "0.2", "1", "0.5->0.1"};
    throw std::invalid_argument("unknown ablation study '" + study + "'");
}

RunConfig apply_ablation_cell(const std::string& study, const std::string& cell,
                              const RunConfig& base) {
    RunConfig cfg = base;
    if (study == "beta-sampling") {
        cfg.train.shaping.sample_from_beta = cell == "sampling";
    } else if (study == "state-action") {
        cfg.train.shaping.state_action_features = cell == "state-action";
    } else if (study == "retention") {
        apply_key_value(cfg, "phi", cell);
    } else if (study == "rff-dim") {
        apply_key_value(cfg, "rff_dim", cell);
    } else if (study == "lambda") {
        apply_key_value(cfg, "lambda", cell);
    } else if (study == "bandwidth") {
        if (cell == "0.5->0.1") {
            apply_key_value(cfg, "bandwidth", "0.5");
            apply_key_value(cfg, "bandwidth_final", "0.1");
        } else {
            apply_key_value(cfg, "bandwidth", cell);
            cfg.train.bandwidth_final = 0.0;
        }
    } else {
        throw std::invalid_argument("unknown ablation study '" + study + "'");
    }
    return cfg;
}

std::vector<AblationRow> run_ablation(const std::string& study, const RunConfig& base,
                                      const std::string& out_csv) {
    const std::vector<std::string> cells = ablation_cells(study);
    std::vector<AblationRow> rows;
    for (const auto& cell : cells) {
        RunConfig cfg = apply_ablation_cell(study, cell, base);
        std::string cell_dir = cell;
        for (auto& c : cell_dir) {
            if (c == '>' || c == '-' || c == '.') c = '_';
        }
        cfg.out_dir = base.out_dir + "/" + study + "/" + cell_dir;
        const std::vector<SeedResult> results = run_training(cfg);

        std::vector<double> finals, aucs;
        for (const auto& r : results) {
            finals.push_back(r.final_return);
            aucs.push_back(r.curve_mean);
        }
        AblationRow row;
        row.study = study;
        row.cell = cell;
        row.final_mean = vector_mean(finals);
        row.final_stderr = vector_stderr(finals);
        row.auc_mean = vector_mean(aucs);
        row.auc_stderr = vector_stderr(aucs);
        rows.push_back(row);
    }

    if (!out_csv.empty()) {
        fs::create_directories(fs::path(out_csv).parent_path().string().empty()
                                   ? "."
                                   : fs::path(out_csv).parent_path().string());
        std::ofstream out(out_csv);
        if (!out) throw std::runtime_error("cannot write " + out_csv);
        out << "# sasr-ablation-csv v1\n";
        out << "study,cell,final_mean,final_stderr,auc_mean,auc_stderr\n";
        for (const auto& r : rows) {
            out << r.study << ',' << r.cell << ',' << fmt_double(r.final_mean) << ','
                << fmt_double(r.final_stderr) << ',' << fmt_double(r.auc_mean) << ','
                << fmt_double(r.auc_stderr) << '\n';
        }
    }
    return rows;
}

BenchSummary run_bench(const std::vector<int>& buffer_sizes, const std::vector<int>& batch_sizes,
                       const std::vector<int>& feature_dims, const std::string& out_csv) {
    if (buffer_sizes.empty() || batch_sizes.empty() || feature_dims.empty()) {
        throw std::invalid_argument("run_bench: all size lists must be non-empty");
    }
    for (int v : buffer_sizes) {
        if (v < 1) throw std::invalid_argument("run_bench: buffer sizes must be positive");
    }
    for (int v : batch_sizes) {
        if (v < 1) throw std::invalid_argument("run_bench: batch sizes must be positive");
    }
    for (int v : feature_dims) {
        if (v < 1) throw std::invalid_argument("run_bench: feature dims must be positive");
    }

    BenchSummary summary;
    const int state_dim = 2;

    // Queries are passed feature-per-column so each query binds without a
    // strided copy; only the estimation work is timed.
    const auto time_queries = [](const LabeledStateStore& store, const Eigen::MatrixXd& queries_t,
                                 bool per_pair) {
        double best = std::numeric_limits<double>::infinity();
        volatile double sink = 0.0;
        for (int rep = 0; rep < 3; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            double acc = 0.0;
            for (Eigen::Index i = 0; i < queries_t.cols(); ++i) {
                acc += per_pair ? store.estimate_count_per_pair(queries_t.col(i))
                                : store.estimate_count(queries_t.col(i));
            }
            const auto t1 = std::chrono::steady_clock::now();
            sink = sink + acc;
            best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
        }
        return best;
    };

    for (int m : feature_dims) {
        RffProjector projector(state_dim, m, 0.2, KernelKind::Gaussian, 7);
        for (int dsize : buffer_sizes) {
            LabeledStateStore store(StoreLabel::Success, 1.0, m);
            {
                Rng retention(1);
                std::vector<Eigen::VectorXd> states;
                states.reserve(static_cast<std::size_t>(dsize));
                Rng rebuild(99);
                for (int i = 0; i < dsize; ++i) {
                    Eigen::VectorXd s(state_dim);
                    for (int d = 0; d < state_dim; ++d) s(d) = rebuild.uniform(-1.0, 1.0);
                    states.push_back(std::move(s));
                }
                store.record_states(states, projector, retention);
            }
            for (int bsize : batch_sizes) {
                Eigen::MatrixXd queries(bsize, state_dim);
                Rng qrng(5);
                for (int i = 0; i < bsize; ++i) {
                    for (int d = 0; d < state_dim; ++d) queries(i, d) = qrng.uniform(-1.0, 1.0);
                }
                const Eigen::MatrixXd feats_t = projector.project_rows(queries).transpose();
                summary.rows.push_back(
                    {"per-pair", m, dsize, bsize, time_queries(store, feats_t, true)});
                summary.rows.push_back(
                    {"cached", m, dsize, bsize, time_queries(store, feats_t, false)});
            }
        }
    }

    // Log-log slopes on the per-pair path, averaged over the other axis.
    const int m0 = feature_dims.back();
    const auto find_time = [&](const std::string& mode, int d, int b) {
        for (const auto& r : summary.rows) {
            if (r.mode == mode && r.feature_dim == m0 && r.buffer_size == d && r.batch_size == b) {
                return r.seconds;
            }
        }
        throw std::logic_error("run_bench: missing grid cell");
    };
    if (buffer_sizes.size() >= 2) {
        std::vector<double> slopes;
        for (int b : batch_sizes) {
            std::vector<double> xs, ys;
            for (int d : buffer_sizes) {
                xs.push_back(std::log2(static_cast<double>(d)));
                ys.push_back(std::log2(find_time("per-pair", d, b)));
            }
            slopes.push_back(regression_slope(xs, ys));
        }
        summary.per_pair_slope_in_buffer = vector_mean(slopes);

        const int dmin = *std::min_element(buffer_sizes.begin(), buffer_sizes.end());
        const int dmax = *std::max_element(buffer_sizes.begin(), buffer_sizes.end());
        const int bmax = *std::max_element(batch_sizes.begin(), batch_sizes.end());
        summary.cached_buffer_ratio =
            find_time("cached", dmax, bmax) / find_time("cached", dmin, bmax);
    }
    if (batch_sizes.size() >= 2) {
        std::vector<double> slopes;
        for (int d : buffer_sizes) {
            std::vector<double> xs, ys;
            for (int b : batch_sizes) {
                xs.push_back(std::log2(static_cast<double>(b)));
                ys.push_back(std::log2(find_time("per-pair", d, b)));
            }
            slopes.push_back(regression_slope(xs, ys));
        }
        summary.per_pair_slope_in_batch = vector_mean(slopes);
    }

    if (!out_csv.empty()) {
        std::ofstream out(out_csv);
        if (!out) throw std::runtime_error("cannot write " + out_csv);
        out << "# sasr-bench-csv v1\n";
        out << "mode,feature_dim,buffer_size,batch_size,seconds\n";
        for (const auto& r : summary.rows) {
            out << r.mode << ',' << r.feature_dim << ',' << r.buffer_size << ',' << r.batch_size
                << ',' << fmt_double(r.seconds) << '\n';
        }
        out << "# per_pair_slope_in_buffer = " << fmt_double(summary.per_pair_slope_in_buffer)
            << "\n";
        out << "# per_pair_slope_in_batch = " << fmt_double(summary.per_pair_slope_in_batch)
            << "\n";
        out << "# cached_buffer_ratio = " << fmt_double(summary.cached_buffer_ratio) << "\n";
    }
    return summary;
}

namespace {
constexpr uint64_t kStatesMagic = 0x5341535253545354ULL;
}

void write_states_file(const std::string& path, const std::vector<double>& flat, int dim,
                       const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    if (dim < 1 || flat.size() % static_cast<std::size_t>(dim) != 0) {
        throw std::invalid_argument("write_states_file: bad dimension");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    io::write_u64(out, kStatesMagic);
    io::write_u64(out, static_cast<uint64_t>(dim));
    io::write_u64(out, flat.size() / static_cast<std::size_t>(dim));
    io::write_f64_array(out, lo.data(), static_cast<std::size_t>(lo.size()));
    io::write_f64_array(out, hi.data(), static_cast<std::size_t>(hi.size()));
    io::write_f64_array(out, flat.data(), flat.size());
}

uint64_t DensityWindow::support() const {
    uint64_t s = 0;
    for (uint64_t c : counts) {
        if (c > 0) ++s;
    }
    return s;
}

std::vector<DensityWindow> run_density(const std::string& states_path, int bins,
                                       const std::string& out_dir, int64_t window_steps) {
    if (bins < 1) throw std::invalid_argument("run_density: bins must be >= 1");
    if (window_steps < 1) throw std::invalid_argument("run_density: window_steps must be >= 1");
    std::ifstream in(states_path, std::ios::binary);
    if (!in) throw std::runtime_error("run_density: cannot open " + states_path);
    io::expect_magic(in, kStatesMagic, "states file");
    const int dim = static_cast<int>(io::read_u64(in));
    const uint64_t count = io::read_u64(in);
    if (dim != 2) throw std::runtime_error("run_density: expected 2-dimensional states");
    Eigen::VectorXd lo(dim), hi(dim);
    io::read_f64_array(in, lo.data(), static_cast<std::size_t>(dim));
    io::read_f64_array(in, hi.data(), static_cast<std::size_t>(dim));

    std::vector<DensityWindow> windows;
    fs::create_directories(out_dir);
    const auto bin_of = [&](double v, int d) {
        const double span = hi(d) - lo(d);
        int b = static_cast<int>((v - lo(d)) / span * bins);
        return std::min(std::max(b, 0), bins - 1);
    };
    for (uint64_t i = 0; i < count; ++i) {
        const auto w = static_cast<std::size_t>(i / static_cast<uint64_t>(window_steps));
        while (windows.size() <= w) {
            DensityWindow dw;
            dw.first_step = static_cast<int64_t>(windows.size()) * window_steps;
            dw.counts.assign(static_cast<std::size_t>(bins) * static_cast<std::size_t>(bins), 0);
            windows.push_back(std::move(dw));
        }
        double v0 = io::read_f64(in);
        double v1 = io::read_f64(in);
        const int b0 = bin_of(v0, 0);
        const int b1 = bin_of(v1, 1);
        windows[w].counts[static_cast<std::size_t>(b0) * static_cast<std::size_t>(bins) +
                          static_cast<std::size_t>(b1)] += 1;
        windows[w].total += 1;
    }

    for (std::size_t w = 0; w < windows.size(); ++w) {
        const std::string path = out_dir + "/density_window" + std::to_string(w) + ".csv";
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << "# sasr-density-csv v1 window=" << w << " first_step=" << windows[w].first_step
            << " total=" << windows[w].total << "\n";
        out << "bin0,bin1,count\n";
        for (int b0 = 0; b0 < bins; ++b0) {
            for (int b1 = 0; b1 < bins; ++b1) {
                out << b0 << ',' << b1 << ','
                    << windows[w].counts[static_cast<std::size_t>(b0) *
                                             static_cast<std::size_t>(bins) +
                                         static_cast<std::size_t>(b1)]
                    << '\n';
            }
        }
    }
    return windows;
}

}  // namespace sasr
