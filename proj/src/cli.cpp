#include "ieq/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ieq/dataset_io.hpp"
#include "ieq/errors.hpp"
#include "ieq/kernels.hpp"
#include "ieq/time_util.hpp"

namespace ieq::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    const char* env = std::getenv(kWorkDirEnvVar);
    cfg.work_dir = env && *env ? env : "ieq_work";
    return cfg;
}

namespace {

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

void parse_into(const json& root, RunConfig& cfg) {
    if (root.contains("paths")) {
        const json& paths = root.at("paths");
        read_field(paths, "work_dir", cfg.work_dir);
        read_field(paths, "input_csv", cfg.input_csv);
    }
    if (root.contains("pipeline")) {
        const json& p = root.at("pipeline");
        if (p.contains("schema")) {
            const json& s = p.at("schema");
            read_field(s, "timestamp", cfg.schema.timestamp);
            read_field(s, "temperature", cfg.schema.temperature);
            read_field(s, "co2", cfg.schema.co2);
            read_field(s, "humidity", cfg.schema.humidity);
        }
        read_field(p, "max_gap_steps", cfg.max_gap_steps);
        read_field(p, "min_segment_length", cfg.min_segment_length);
        read_field(p, "window", cfg.window);
        read_field(p, "horizon", cfg.horizon);
        if (p.contains("split")) {
            const auto split = p.at("split").get<std::vector<double>>();
            if (split.size() != 3) {
                throw ConfigError("config: pipeline.split must have three fractions");
            }
            cfg.train_fraction = split[0];
            cfg.val_fraction = split[1];
            cfg.test_fraction = split[2];
        }
    }
    if (root.contains("model")) {
        const json& m = root.at("model");
        if (m.contains("family")) cfg.model.family = family_from_name(m.at("family").get<std::string>());
        read_field(m, "input_features", cfg.model.input_features);
        read_field(m, "hidden_size", cfg.model.hidden_size);
        read_field(m, "conv_filters", cfg.model.conv_filters);
        read_field(m, "conv_kernel", cfg.model.conv_kernel);
        read_field(m, "seed", cfg.model.seed);
    }
    if (root.contains("training")) {
        const json& t = root.at("training");
        read_field(t, "batch_size", cfg.training.batch_size);
        read_field(t, "max_epochs", cfg.training.max_epochs);
        read_field(t, "initial_lr", cfg.training.initial_lr);
        read_field(t, "lr_factor", cfg.training.lr_factor);
        read_field(t, "lr_patience", cfg.training.lr_patience);
        read_field(t, "min_lr", cfg.training.min_lr);
        read_field(t, "early_stop_patience", cfg.training.early_stop_patience);
        read_field(t, "adam_beta1", cfg.training.adam_beta1);
        read_field(t, "adam_beta2", cfg.training.adam_beta2);
        read_field(t, "adam_eps", cfg.training.adam_eps);
        read_field(t, "shuffle_seed", cfg.training.shuffle_seed);
    }
    if (root.contains("synth")) {
        const json& s = root.at("synth");
        read_field(s, "days", cfg.synth.days);
        read_field(s, "seed", cfg.synth.seed);
        read_field(s, "start_epoch", cfg.synth.start_epoch);
        read_field(s, "temperature_base", cfg.synth.temperature_base);
        read_field(s, "temperature_amplitude", cfg.synth.temperature_amplitude);
        read_field(s, "co2_baseline", cfg.synth.co2_baseline);
        read_field(s, "co2_event_rate_per_day", cfg.synth.co2_event_rate_per_day);
        read_field(s, "co2_event_magnitude", cfg.synth.co2_event_magnitude);
        read_field(s, "co2_decay_steps", cfg.synth.co2_decay_steps);
        read_field(s, "humidity_base", cfg.synth.humidity_base);
        read_field(s, "humidity_amplitude", cfg.synth.humidity_amplitude);
        read_field(s, "noise_temperature", cfg.synth.noise_temperature);
        read_field(s, "noise_co2", cfg.synth.noise_co2);
        read_field(s, "noise_humidity", cfg.synth.noise_humidity);
        read_field(s, "gap_rate_per_day", cfg.synth.gap_rate_per_day);
        read_field(s, "gap_min_steps", cfg.synth.gap_min_steps);
        read_field(s, "gap_max_steps", cfg.synth.gap_max_steps);
    }
    read_field(root, "threads", cfg.threads);
    read_field(root, "export_series", cfg.export_series);
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void ensure_work_dir(const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.work_dir, ec);
    if (ec) throw IoError("cannot create work directory " + cfg.work_dir);
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    RunConfig cfg = defaults();
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    json root;
    try {
        root = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path + ": " + e.what());
    }
    try {
        parse_into(root, cfg);
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path + ": " + e.what());
    }
    if (std::abs(cfg.train_fraction + cfg.val_fraction + cfg.test_fraction - 1.0) > 1e-9) {
        throw ConfigError("config: split fractions must sum to 1");
    }
    cfg.training.validate();
    return cfg;
}

std::string RunConfig::synthetic_csv_path() const { return join(work_dir, "synthetic.csv"); }
std::string RunConfig::ground_truth_path() const { return join(work_dir, "ground_truth.txt"); }
std::string RunConfig::dataset_path(const std::string& split) const {
    return join(work_dir, "dataset_" + split + ".ieqw");
}
std::string RunConfig::scaler_path() const { return join(work_dir, "scaler.txt"); }
std::string RunConfig::prepare_report_path() const {
    return join(work_dir, "prepare_report.txt");
}
std::string RunConfig::checkpoint_path(const std::string& family) const {
    return join(work_dir, "checkpoint_" + family + ".ieqc");
}
std::string RunConfig::history_path(const std::string& family) const {
    return join(work_dir, "history_" + family + ".csv");
}
std::string RunConfig::metrics_report_path(const std::string& family) const {
    return join(work_dir, "metrics_" + family + ".txt");
}
std::string RunConfig::metrics_table_path() const { return join(work_dir, "metrics_table.csv"); }
std::string RunConfig::series_path(const std::string& family) const {
    return join(work_dir, "series_" + family + ".csv");
}
std::string RunConfig::benchmark_table_path() const {
    return join(work_dir, "benchmark_table.csv");
}
std::string RunConfig::benchmark_report_path() const {
    return join(work_dir, "benchmark_report.txt");
}

std::string RunConfig::resolved_input_csv() const {
    return input_csv.empty() ? synthetic_csv_path() : input_csv;
}

// ---------------------------------------------------------------------------
// cmd_synth
// ---------------------------------------------------------------------------

SynthSummary cmd_synth(const RunConfig& config) {
    set_max_threads(config.threads);
    ensure_work_dir(config);
    auto [frame, log] = generate(config.synth);
    write_frame_csv(frame, config.synthetic_csv_path());
    write_ground_truth(log, config.ground_truth_path());
    SynthSummary summary;
    summary.csv_path = config.synthetic_csv_path();
    summary.ground_truth_path = config.ground_truth_path();
    summary.steps = frame.size();
    summary.gaps = log.gaps.size();
    return summary;
}

// ---------------------------------------------------------------------------
// cmd_prepare
// ---------------------------------------------------------------------------

namespace {

std::size_t count_invalid_runs(const TimeSeriesFrame& frame) {
    std::size_t runs = 0;
    bool in_run = false;
    for (std::size_t i = 0; i < frame.size(); ++i) {
        if (!frame.valid[i]) {
            if (!in_run) ++runs;
            in_run = true;
        } else {
            in_run = false;
        }
    }
    return runs;
}

void write_prepare_report(const RunConfig& config, const PrepareSummary& s,
                          const Scaler& scaler) {
    std::ofstream out(config.prepare_report_path());
    if (!out) throw IoError("cmd_prepare: cannot open " + config.prepare_report_path());
    out << "IEQ preparation report\n";
    out << "input " << config.resolved_input_csv() << "\n";
    out << "ingested_rows " << s.ingested_rows << "\n";
    out << "valid_records " << s.valid_rows << "\n";
    out << "grid_rows " << s.grid_rows << "\n";
    out << "gaps_found " << s.gaps_found << "\n";
    out << "gaps_filled " << s.gaps_filled << "\n";
    out << "points_filled " << s.points_filled << "\n";
    out << "segments " << s.segments.size() << "\n";
    for (std::size_t i = 0; i < s.segments.size(); ++i) {
        out << "segment " << i << " start "
            << time_util::format_timestamp(s.segment_start_ts[i]) << " length "
            << s.segments[i].length() << "\n";
    }
    out << "windows " << s.total_windows << "\n";
    out << "split " << s.train_samples << " " << s.val_samples << " " << s.test_samples
        << "\n";
    char buf[96];
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        std::snprintf(buf, sizeof(buf), "feature %s min %.17g max %.17g degenerate %d\n",
                      kFeatureNames[f], scaler.feature_min(f), scaler.feature_max(f),
                      scaler.degenerate(f) ? 1 : 0);
        out << buf;
    }
}

}  // namespace

PrepareSummary cmd_prepare(const RunConfig& config) {
    set_max_threads(config.threads);
    ensure_work_dir(config);
    PrepareSummary summary;

    const TimeSeriesFrame raw = ingest_csv(config.resolved_input_csv(), config.schema);
    summary.ingested_rows = raw.size();
    summary.valid_rows = raw.valid_count();

    const TimeSeriesFrame grid = regularize(raw);
    summary.grid_rows = grid.size();
    summary.gaps_found = count_invalid_runs(grid);

    const TimeSeriesFrame filled = interpolate_short_gaps(grid, config.max_gap_steps);
    summary.points_filled = filled.valid_count() - grid.valid_count();
    summary.gaps_filled = summary.gaps_found - count_invalid_runs(filled);

    const auto segments = extract_segments(filled, config.min_segment_length);
    summary.segments = segments;
    for (const auto& seg : segments) {
        summary.segment_start_ts.push_back(filled.timestamps[seg.start_index]);
    }

    const Scaler scaler =
        Scaler::fit(filled, segments, config.train_fraction, config.window, config.horizon);
    const WindowedDataset windows =
        make_windows(filled, segments, scaler, config.window, config.horizon);
    summary.total_windows = windows.samples();

    const SplitDataset split = chronological_split(windows, config.train_fraction,
                                                   config.val_fraction, config.test_fraction);
    summary.train_samples = split.train.samples();
    summary.val_samples = split.validation.samples();
    summary.test_samples = split.test.samples();

    write_dataset(split.train, config.dataset_path("train"));
    write_dataset(split.validation, config.dataset_path("validation"));
    write_dataset(split.test, config.dataset_path("test"));
    write_scaler(scaler, config.scaler_path());
    write_prepare_report(config, summary, scaler);
    return summary;
}

// ---------------------------------------------------------------------------
// cmd_train / cmd_evaluate
// ---------------------------------------------------------------------------

namespace {

WindowedDataset load_split(const RunConfig& config, const std::string& split) {
    const std::string path = config.dataset_path(split);
    if (!fs::exists(path)) {
        throw DataError("missing prepared artifact " + path + " (run `prepare` first)");
    }
    return read_dataset(path);
}

TrainSummary train_family(const RunConfig& config, const ModelSpec& spec,
                          const WindowedDataset& train, const WindowedDataset& validation) {
    const FitResult result = fit(spec, train, validation, config.training);
    TrainSummary summary;
    summary.family = family_name(spec.family);
    summary.checkpoint_path = config.checkpoint_path(summary.family);
    summary.history_path = config.history_path(summary.family);
    summary.history = result.history;
    summary.best_epoch = result.best_epoch;
    summary.early_stopped = result.early_stopped;
    summary.param_count = result.params.size();
    save_checkpoint(result.params, summary.checkpoint_path);
    write_history_csv(result.history, summary.history_path);
    return summary;
}

}  // namespace

TrainSummary cmd_train(const RunConfig& config) {
    set_max_threads(config.threads);
    ensure_work_dir(config);
    const WindowedDataset train = load_split(config, "train");
    const WindowedDataset validation = load_split(config, "validation");
    return train_family(config, config.model, train, validation);
}

MetricsReport cmd_evaluate(const RunConfig& config, const std::string& checkpoint) {
    set_max_threads(config.threads);
    const std::string family = family_name(config.model.family);
    const std::string ckpt_path =
        checkpoint.empty() ? config.checkpoint_path(family) : checkpoint;
    if (!fs::exists(ckpt_path)) {
        throw DataError("missing checkpoint " + ckpt_path + " (run `train` first)");
    }
    const ModelParams params = load_checkpoint(ckpt_path);
    const WindowedDataset test = load_split(config, "test");
    const Scaler scaler = read_scaler(config.scaler_path());

    MetricsReport report = evaluate(params, test, scaler);
    report.shuffle_seed = config.training.shuffle_seed;
    const std::string report_family = family_name(params.spec().family);
    write_metrics_report(report, config.metrics_report_path(report_family));
    write_metrics_table({report}, config.metrics_table_path());
    if (config.export_series) {
        export_series(params, test, scaler, config.series_path(report_family));
    }
    return report;
}

// ---------------------------------------------------------------------------
// cmd_benchmark
// ---------------------------------------------------------------------------

BenchmarkSummary cmd_benchmark(const RunConfig& config) {
    set_max_threads(config.threads);
    ensure_work_dir(config);
    const WindowedDataset train = load_split(config, "train");
    const WindowedDataset validation = load_split(config, "validation");
    const WindowedDataset test = load_split(config, "test");
    const Scaler scaler = read_scaler(config.scaler_path());

    BenchmarkSummary summary;
    summary.table_path = config.benchmark_table_path();
    summary.report_path = config.benchmark_report_path();

    std::exception_ptr first_failure;
    std::string failure_note;
    const std::array<Family, 3> families = {Family::lstm, Family::gru, Family::cnn_lstm};

    for (Family family : families) {
        ModelSpec spec = config.model;
        spec.family = family;
        const auto started = std::chrono::steady_clock::now();
        try {
            const TrainSummary trained = train_family(config, spec, train, validation);
            const ModelParams params = load_checkpoint(trained.checkpoint_path);
            MetricsReport report = evaluate(params, test, scaler);
            report.shuffle_seed = config.training.shuffle_seed;
            write_metrics_report(report, config.metrics_report_path(trained.family));
            if (config.export_series) {
                export_series(params, test, scaler, config.series_path(trained.family));
            }

            FamilyResult result;
            result.family = trained.family;
            result.param_count = trained.param_count;
            result.epochs_run = trained.history.size();
            result.best_epoch = trained.best_epoch;
            result.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                    .count();
            double epoch_total = 0.0;
            for (const EpochStats& e : trained.history) epoch_total += e.seconds;
            result.mean_epoch_seconds =
                trained.history.empty() ? 0.0 : epoch_total / trained.history.size();
            result.report = report;
            summary.results.push_back(std::move(result));
        } catch (...) {
            if (!first_failure) {
                first_failure = std::current_exception();
                failure_note = family_name(family);
            }
        }
    }

    // The deterministic metrics table records completed families only;
    // timings live in the separate report file.
    std::vector<MetricsReport> reports;
    for (const FamilyResult& r : summary.results) reports.push_back(r.report);
    write_metrics_table(reports, summary.table_path);

    {
        std::ofstream out(summary.report_path);
        if (!out) throw IoError("cmd_benchmark: cannot open " + summary.report_path);
        out << "IEQ benchmark report\n";
        out << "completed " << summary.results.size() << " of 3 families\n";
        char buf[256];
        for (const FamilyResult& r : summary.results) {
            std::snprintf(buf, sizeof(buf),
                          "model %s params %zu epochs %zu best_epoch %zu wall_seconds %.3f "
                          "mean_epoch_seconds %.4f global_mae %.10g\n",
                          r.family.c_str(), r.param_count, r.epochs_run, r.best_epoch,
                          r.wall_seconds, r.mean_epoch_seconds, r.report.global.mae);
            out << buf;
        }
        if (first_failure) out << "failed " << failure_note << "\n";
    }

    if (first_failure) std::rethrow_exception(first_failure);
    return summary;
}

}  // namespace ieq::cli
