#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ieq/cli.hpp"
#include "ieq/errors.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::string work_dir;
    std::string input_csv;
    std::string family;
    std::string checkpoint;
    long long epochs = -1;
    long long hidden = -1;
    long long batch = -1;
    long long threads = -1;
    long long seed = -1;
    long long shuffle_seed = -1;
    long long synth_days = -1;
    long long synth_seed = -1;
    double lr = -1.0;
    bool export_series = false;
};

ieq::cli::RunConfig build_config(const Overrides& o) {
    ieq::cli::RunConfig cfg = o.config_path.empty()
                                  ? ieq::cli::RunConfig::defaults()
                                  : ieq::cli::RunConfig::from_file(o.config_path);
    if (!o.work_dir.empty()) cfg.work_dir = o.work_dir;
    if (!o.input_csv.empty()) cfg.input_csv = o.input_csv;
    if (!o.family.empty()) cfg.model.family = ieq::family_from_name(o.family);
    if (o.epochs >= 0) cfg.training.max_epochs = static_cast<std::size_t>(o.epochs);
    if (o.hidden >= 0) cfg.model.hidden_size = static_cast<std::size_t>(o.hidden);
    if (o.batch >= 0) cfg.training.batch_size = static_cast<std::size_t>(o.batch);
    if (o.threads >= 0) cfg.threads = static_cast<int>(o.threads);
    if (o.seed >= 0) cfg.model.seed = static_cast<std::uint64_t>(o.seed);
    if (o.shuffle_seed >= 0) cfg.training.shuffle_seed = static_cast<std::uint64_t>(o.shuffle_seed);
    if (o.synth_days >= 0) cfg.synth.days = static_cast<std::size_t>(o.synth_days);
    if (o.synth_seed >= 0) cfg.synth.seed = static_cast<std::uint64_t>(o.synth_seed);
    if (o.lr >= 0.0) cfg.training.initial_lr = o.lr;
    if (o.export_series) cfg.export_series = true;
    cfg.training.validate();
    return cfg;
}

void print_report_line(const ieq::MetricsReport& r) {
    std::printf("%s: global mae %.6g mse %.6g rmse %.6g r2 %s (%zu samples)\n",
                r.model.c_str(), r.global.mae, r.global.mse, r.global.rmse,
                r.global.r2 ? std::to_string(*r.global.r2).c_str() : "undefined",
                r.sample_count);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Indoor climate forecasting toolkit: preprocess sensor CSVs, train "
                 "LSTM/GRU/CNN-LSTM forecasters, and benchmark them."};
    app.require_subcommand(1);

    Overrides o;
    app.add_option("-c,--config", o.config_path, "JSON run configuration file");
    app.add_option("-w,--work-dir", o.work_dir,
                   "Work directory (overrides config and " +
                       std::string(ieq::cli::kWorkDirEnvVar) + ")");
    app.add_option("--threads", o.threads, "Max worker threads (default 1, deterministic)");

    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic sensor CSV");
    synth->add_option("--days", o.synth_days, "Days of data (288 steps/day)");
    synth->add_option("--seed", o.synth_seed, "Generator seed");

    auto* prepare = app.add_subcommand("prepare", "Build train/validation/test datasets");
    prepare->add_option("-i,--input", o.input_csv, "Input sensor CSV");

    auto* train = app.add_subcommand("train", "Train the configured model family");
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a trained checkpoint");
    evaluate->add_option("--checkpoint", o.checkpoint, "Checkpoint file (default from family)");
    auto* benchmark =
        app.add_subcommand("benchmark", "Train and compare all three model families");

    for (CLI::App* cmd : {train, evaluate, benchmark}) {
        cmd->add_option("--family", o.family, "Model family: lstm | gru | cnn_lstm");
        cmd->add_option("--epochs", o.epochs, "Max training epochs");
        cmd->add_option("--hidden", o.hidden, "Hidden state size");
        cmd->add_option("--batch", o.batch, "Batch size");
        cmd->add_option("--lr", o.lr, "Initial learning rate");
        cmd->add_option("--seed", o.seed, "Model init seed");
        cmd->add_option("--shuffle-seed", o.shuffle_seed, "Epoch shuffle seed");
        cmd->add_flag("--export-series", o.export_series,
                      "Write prediction-vs-truth series CSV");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        const ieq::cli::RunConfig cfg = build_config(o);

        if (synth->parsed()) {
            const auto s = ieq::cli::cmd_synth(cfg);
            std::printf("synth: %zu steps, %zu gaps -> %s\n", s.steps, s.gaps,
                        s.csv_path.c_str());
        } else if (prepare->parsed()) {
            const auto s = ieq::cli::cmd_prepare(cfg);
            std::printf("prepare: %zu rows -> %zu segments, %zu windows (%zu/%zu/%zu)\n",
                        s.ingested_rows, s.segments.size(), s.total_windows, s.train_samples,
                        s.val_samples, s.test_samples);
        } else if (train->parsed()) {
            const auto s = ieq::cli::cmd_train(cfg);
            std::printf("train: %s, %zu epochs, best epoch %zu, val mae %.6g -> %s\n",
                        s.family.c_str(), s.history.size(), s.best_epoch,
                        s.history.empty() ? 0.0 : s.history[s.best_epoch - 1].val_mae,
                        s.checkpoint_path.c_str());
        } else if (evaluate->parsed()) {
            const auto report = ieq::cli::cmd_evaluate(cfg, o.checkpoint);
            print_report_line(report);
        } else if (benchmark->parsed()) {
            const auto s = ieq::cli::cmd_benchmark(cfg);
            for (const auto& r : s.results) print_report_line(r.report);
            std::printf("benchmark table -> %s\n", s.table_path.c_str());
        }
        return 0;
    } catch (const ieq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ieq::TrainingAbort& e) {
        std::cerr << "training abort: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
