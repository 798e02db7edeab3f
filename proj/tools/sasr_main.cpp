#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "sasr/harness.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
};

// Flag overrides win over the config file.
sasr::RunConfig build_config(const CommonFlags& flags) {
    sasr::RunConfig cfg;
    if (!flags.config_path.empty()) cfg = sasr::load_config_file(flags.config_path);
    for (const auto& [key, value] : flags.overrides) sasr::apply_key_value(cfg, key, value);
    return cfg;
}

void add_common_options(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "key=value config file");
    auto track = [&flags](const std::string& key) {
        return [&flags, key](const std::string& value) {
            flags.overrides.emplace_back(key, value);
        };
    };
    cmd->add_option_function<std::string>("--env", track("env"),
                                          "environment: mountain-car | sparse-chain");
    cmd->add_option_function<std::string>("--chain-length", track("chain_length"),
                                          "sparse-chain length");
    cmd->add_option_function<std::string>("--steps", track("total_steps"), "total env steps");
    cmd->add_option_function<std::string>("--seeds", track("seeds"),
                                          "seed count or comma-separated list");
    cmd->add_option_function<std::string>("--lambda", track("lambda"), "shaped reward weight");
    cmd->add_option_function<std::string>("--phi", track("phi"), "retention rate");
    cmd->add_option_function<std::string>("--rff-dim", track("rff_dim"), "feature dimension");
    cmd->add_option_function<std::string>("--bandwidth", track("bandwidth"), "kernel bandwidth");
    cmd->add_option_function<std::string>("--kernel", track("kernel"),
                                          "gaussian | laplacian | cauchy");
    cmd->add_flag_function("--no-beta-sampling",
                           [&flags](int64_t) { flags.overrides.emplace_back("beta_sampling", "0"); },
                           "use the deterministic success ratio");
    cmd->add_flag_function(
        "--state-action-features",
        [&flags](int64_t) { flags.overrides.emplace_back("state_action_features", "1"); },
        "estimate densities over state-action pairs");
    cmd->add_option_function<std::string>("--out", track("out_dir"), "output directory");
    cmd->add_option_function<std::string>("--eval-interval", track("eval_interval"),
                                          "steps between evaluations");
    cmd->add_option_function<std::string>("--eval-episodes", track("eval_episodes"),
                                          "episodes per evaluation");
    cmd->add_option_function<std::string>("--workers", track("workers"), "parallel seed workers");
    cmd->add_flag_function("--save-checkpoint",
                           [&flags](int64_t) { flags.overrides.emplace_back("save_checkpoint", "1"); },
                           "write a checkpoint per seed");
    cmd->add_flag_function("--log-density",
                           [&flags](int64_t) { flags.overrides.emplace_back("log_density", "1"); },
                           "log visited states and per-bin reward stats");
    cmd->add_option_function<std::string>("--early-stop-return", track("early_stop_return"),
                                          "stop once an eval reaches this return");
    cmd->add_option_function<std::string>("--burn-in", track("burn_in_steps"),
                                          "env steps before updates start");
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::string cur;
    for (char c : s + ",") {
        if (c == ',') {
            if (!cur.empty()) out.push_back(std::stoi(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Success-rate reward shaping on a soft actor-critic backbone"};
    app.require_subcommand(1);

    CommonFlags train_flags;
    CLI::App* train = app.add_subcommand("train", "run seeded training, one CSV per seed");
    add_common_options(train, train_flags);

    std::string eval_checkpoint;
    int eval_episodes = 100;
    std::string eval_out;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpointed policy greedily");
    eval->add_option("checkpoint", eval_checkpoint, "checkpoint file")->required();
    eval->add_option("--episodes", eval_episodes, "evaluation episodes (default 100)");
    eval->add_option("--out", eval_out, "CSV output path");

    CommonFlags ablate_flags;
    std::string study;
    CLI::App* ablate = app.add_subcommand("ablate", "sweep one ablation study grid");
    ablate->add_option("study", study,
                       "beta-sampling | state-action | retention | rff-dim | lambda | bandwidth")
        ->required();
    add_common_options(ablate, ablate_flags);

    std::string bench_buffers = "256,1024,4096";
    std::string bench_batches = "256,1024,4096";
    std::string bench_dims = "1000";
    std::string bench_out = "bench.csv";
    CLI::App* bench = app.add_subcommand("bench", "time count estimation across size grids");
    bench->add_option("--buffer-sizes", bench_buffers, "store sizes (comma list)");
    bench->add_option("--batch-sizes", bench_batches, "query batch sizes (comma list)");
    bench->add_option("--rff-dims", bench_dims, "feature dimensions (comma list)");
    bench->add_option("--out", bench_out, "CSV output path");

    std::string density_states;
    int density_bins = 32;
    std::string density_out = "density";
    int64_t density_window = 25000;
    CLI::App* density = app.add_subcommand("density", "bin logged states into per-window histograms");
    density->add_option("states", density_states, "states_seed<k>.bin from a --log-density run")
        ->required();
    density->add_option("--bins", density_bins, "bins per dimension");
    density->add_option("--out", density_out, "output directory");
    density->add_option("--window", density_window, "states per window");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const sasr::RunConfig cfg = build_config(train_flags);
            sasr::save_config_file(cfg, cfg.out_dir + "/config.txt");
            const auto results = sasr::run_training(cfg);
            for (const auto& r : results) {
                std::printf("seed %llu: final return %.4f (curve mean %.4f) -> %s\n",
                            static_cast<unsigned long long>(r.seed), r.final_return, r.curve_mean,
                            r.csv_path.c_str());
            }
        } else if (*eval) {
            const auto [mean, se] = sasr::run_eval(eval_checkpoint, eval_episodes, eval_out);
            std::printf("mean return %.6f +/- %.6f over %d episodes\n", mean, se, eval_episodes);
        } else if (*ablate) {
            const sasr::RunConfig cfg = build_config(ablate_flags);
            const std::string out_csv = cfg.out_dir + "/" + study + ".csv";
            const auto rows = sasr::run_ablation(study, cfg, out_csv);
            for (const auto& r : rows) {
                std::printf("%s %-10s final %.4f +/- %.4f | curve mean %.4f +/- %.4f\n",
                            r.study.c_str(), r.cell.c_str(), r.final_mean, r.final_stderr,
                            r.auc_mean, r.auc_stderr);
            }
            std::printf("wrote %s\n", out_csv.c_str());
        } else if (*bench) {
            const auto summary =
                sasr::run_bench(parse_int_list(bench_buffers), parse_int_list(bench_batches),
                                parse_int_list(bench_dims), bench_out);
            std::printf("per-pair slope in store size: %.3f\n", summary.per_pair_slope_in_buffer);
            std::printf("per-pair slope in batch size: %.3f\n", summary.per_pair_slope_in_batch);
            std::printf("cached-path time ratio across store sizes: %.3f\n",
                        summary.cached_buffer_ratio);
            std::printf("wrote %s\n", bench_out.c_str());
        } else if (*density) {
            const auto windows =
                sasr::run_density(density_states, density_bins, density_out, density_window);
            for (std::size_t w = 0; w < windows.size(); ++w) {
                std::printf("window %zu: %llu states, %llu occupied bins\n", w,
                            static_cast<unsigned long long>(windows[w].total),
                            static_cast<unsigned long long>(windows[w].support()));
            }
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
