// Command-line front end: gen-data, train, predict, eval, gradcheck, bench.
// Exit codes: 0 success, 2 validation error, 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "igcn/pipeline.hpp"

namespace {

struct GlobalOptions {
    std::string config_path;
    std::int64_t seed = -1;  // -1 = keep config value
    int threads = 0;
    bool serial = false;
};

igcn::RunConfig resolve_config(const GlobalOptions& g) {
    igcn::RunConfig config;
    if (!g.config_path.empty()) config = igcn::load_run_config(g.config_path);
    if (g.seed >= 0) config.seed = static_cast<std::uint64_t>(g.seed);
    if (g.threads > 0) config.threads = g.threads;
    config.sync();
    if (config.threads > 0) omp_set_num_threads(config.threads);
    igcn::kern::set_default_exec(g.serial ? igcn::kern::Exec::Serial
                                          : igcn::kern::Exec::Parallel);
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-projection organ shape reconstruction pipeline"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("-c,--config", global.config_path, "Key=value config file");
    app.add_option("--seed", global.seed, "Override the global seed");
    app.add_option("--threads", global.threads, "OpenMP thread count (0 = runtime default)");
    app.add_flag("--serial", global.serial, "Run all kernels on the serial reference path");

    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic phantom dataset");
    bool paper_scale = false;
    gen->add_flag("--paper-scale", paper_scale,
                  "640x640 DRRs, 1x1x2.5 mm grid, 144 train / 15 test samples");

    auto* train = app.add_subcommand("train", "Train one model variant");
    std::string variant_str = "full";
    std::int64_t epochs_override = -1;
    train->add_option("--variant", variant_str, "full or no-mapping");
    train->add_option("--epochs", epochs_override, "Override the epoch count");

    auto* predict = app.add_subcommand("predict", "Predict one sample and write an OBJ");
    std::string ckpt_path;
    int sample_id = 0;
    predict->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    predict->add_option("--sample", sample_id, "Sample id from the manifest")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate checkpoints on the test split");
    std::vector<std::string> eval_ckpts;
    bool with_oracle = false;
    eval->add_option("--checkpoint", eval_ckpts, "Checkpoint file (repeatable)");
    eval->add_flag("--with-oracle", with_oracle, "Add a ground-truth-injected column");

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    auto* bench = app.add_subcommand("bench", "Time serial vs OpenMP kernels");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        igcn::RunConfig config = resolve_config(global);
        if (gen->parsed()) {
            if (paper_scale) apply_paper_scale(config);
            config.sync();
            const auto summary = igcn::pipeline::run_gen_data(config);
            std::printf("wrote %s: %d train / %d test samples\n",
                        summary.manifest.string().c_str(), summary.train_count,
                        summary.test_count);
        } else if (train->parsed()) {
            if (epochs_override > 0) config.train.epochs = static_cast<int>(epochs_override);
            const auto variant = igcn::parse_variant(variant_str);
            const auto art = igcn::pipeline::run_train(config, variant);
            const auto& last = art.outcome.logs.back();
            std::printf("trained %s for %d epochs: total %.6g rmse %.3f mm\n",
                        igcn::variant_name(variant), last.epoch, last.total, last.rmse_mm);
            std::printf("checkpoint: %s\nlog: %s\n", art.checkpoint.string().c_str(),
                        art.log_csv.string().c_str());
        } else if (predict->parsed()) {
            const auto art = igcn::pipeline::run_predict(config, ckpt_path, sample_id);
            std::printf("wrote %s (forward %.3f ms)\n", art.obj.string().c_str(),
                        art.forward_ms);
        } else if (eval->parsed()) {
            std::vector<std::filesystem::path> paths(eval_ckpts.begin(), eval_ckpts.end());
            const auto art = igcn::pipeline::run_eval(config, paths, with_oracle);
            std::cout << igcn::format_report_table(art.report);
            std::printf("report: %s\n", art.csv.string().c_str());
        } else if (gradcheck->parsed()) {
            const auto outcome = igcn::pipeline::run_gradcheck();
            for (const auto& row : outcome.rows)
                std::printf("%-24s max rel err %.3e (tol %.0e)  %s\n", row.op.c_str(),
                            row.max_rel_err, row.tolerance, row.pass ? "pass" : "FAIL");
            if (!outcome.all_pass) {
                std::fprintf(stderr, "gradient checks failed\n");
                return 3;
            }
        } else if (bench->parsed()) {
            igcn::pipeline::run_bench(std::cout, config);
        }
    } catch (const igcn::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const igcn::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
