#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sasr/trainer.hpp"

namespace sasr {

/// One experiment description: environment, seed list, training config and
/// output location. Defaults are the published hyperparameter set.
struct RunConfig {
    std::string env_name = "mountain-car";
    int chain_length = 20;
    std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
    std::string out_dir = "runs";
    int workers = 0;  // 0: hardware concurrency
    bool save_checkpoint = false;
    bool log_density = false;
    TrainConfig train;
};

/// Applies one key=value setting; throws naming the key when unknown or
/// malformed. `seeds` accepts either a count ("5" -> 0..4) or a comma list.
void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Line-oriented key=value file; '#' starts a comment. Unknown keys throw.
RunConfig load_config_file(const std::string& path);

/// Full key=value dump; load_config_file(save) round-trips exactly.
std::string config_to_text(const RunConfig& cfg);
void save_config_file(const RunConfig& cfg, const std::string& path);

std::unique_ptr<Env> make_env_from_config(const RunConfig& cfg);

struct SeedResult {
    uint64_t seed = 0;
    std::vector<EvalPoint> curve;
    std::string csv_path;
    std::string checkpoint_path;
    std::string states_path;
    /// Mean eval return over the whole curve (area under the learning curve).
    double curve_mean = 0.0;
    double final_return = 0.0;
    bool reached(double threshold) const;
};

/// Trains every seed (in parallel workers), writing one CSV per seed plus
/// optional checkpoints and visited-state logs. Throws on any seed failure.
std::vector<SeedResult> run_training(const RunConfig& cfg);

/// Writes the train CSV for one finished run.
std::string write_train_csv(const std::string& out_dir, uint64_t seed,
                            const std::vector<EvalPoint>& curve);

/// Greedy evaluation of a checkpointed policy; returns (mean, stderr) and
/// writes a one-row CSV next to the checkpoint unless out_csv is empty.
std::pair<double, double> run_eval(const std::string& checkpoint_path, int episodes,
                                   const std::string& out_csv = "");

/// Checkpoint container: env identity plus full trainer state.
void save_checkpoint(const std::string& path, const RunConfig& cfg, const Trainer& trainer);
struct LoadedCheckpoint {
    RunConfig config;
    std::unique_ptr<Trainer> trainer;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

/// Ablation studies over the published grids.
std::vector<std::string> ablation_cells(const std::string& study);
struct AblationRow {
    std::string study, cell;
    double final_mean = 0.0, final_stderr = 0.0;
    double auc_mean = 0.0, auc_stderr = 0.0;
};
std::vector<AblationRow> run_ablation(const std::string& study, const RunConfig& base,
                                      const std::string& out_csv);
/// Returns a copy of `base` with one ablation cell applied.
RunConfig apply_ablation_cell(const std::string& study, const std::string& cell,
                              const RunConfig& base);

struct BenchRow {
    std::string mode;  // "per-pair" or "cached"
    int feature_dim = 0, buffer_size = 0, batch_size = 0;
    double seconds = 0.0;
};
struct BenchSummary {
    std::vector<BenchRow> rows;
    double per_pair_slope_in_buffer = 0.0;  // log-log slope of time vs store size
    double per_pair_slope_in_batch = 0.0;
    double cached_buffer_ratio = 0.0;  // cached-path time largest/smallest store
};
/// Times count-estimation across the size grid and fits log-log slopes.
BenchSummary run_bench(const std::vector<int>& buffer_sizes, const std::vector<int>& batch_sizes,
                       const std::vector<int>& feature_dims, const std::string& out_csv);

/// Visited-state log file (written by run_training when log_density is set).
void write_states_file(const std::string& path, const std::vector<double>& flat, int dim,
                       const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

struct DensityWindow {
    int64_t first_step = 0;
    uint64_t total = 0;
    std::vector<uint64_t> counts;  // bins x bins, row-major
    uint64_t support() const;
};
/// Bins logged states into per-window 2-D histograms (windows of
/// `window_steps` states) and writes one CSV per window.
std::vector<DensityWindow> run_density(const std::string& states_path, int bins,
                                       const std::string& out_dir, int64_t window_steps = 25000);

}  // namespace sasr
