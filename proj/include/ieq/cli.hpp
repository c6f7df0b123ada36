#ifndef IEQ_CLI_HPP
#define IEQ_CLI_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ieq/evaluation.hpp"
#include "ieq/models.hpp"
#include "ieq/pipeline.hpp"
#include "ieq/synthdata.hpp"
#include "ieq/training.hpp"

namespace ieq::cli {

/// Environment variable selecting the default work directory.
inline constexpr const char* kWorkDirEnvVar = "IEQCAST_WORK_DIR";

/**
 * One run configuration drives every subcommand. All fields have defaults,
 * so an empty config file is legal; CLI flags override file values.
 */
struct RunConfig {
    std::string work_dir;   // default: $IEQCAST_WORK_DIR or "ieq_work"
    std::string input_csv;  // default: <work_dir>/synthetic.csv

    CsvSchema schema;
    std::size_t max_gap_steps = 6;
    std::size_t min_segment_length = kDefaultWindow + kDefaultHorizon;
    std::size_t window = kDefaultWindow;
    std::size_t horizon = kDefaultHorizon;
    double train_fraction = 0.85;
    double val_fraction = 0.075;
    double test_fraction = 0.075;

    ModelSpec model;
    TrainConfig training;
    SynthConfig synth;

    int threads = 1;
    bool export_series = false;

    /// Defaults plus environment (no file).
    static RunConfig defaults();

    /// Parse a JSON config file over the defaults. Throws ConfigError on
    /// unparseable content or invalid values.
    static RunConfig from_file(const std::string& path);

    // Artifact locations inside work_dir.
    std::string synthetic_csv_path() const;
    std::string ground_truth_path() const;
    std::string dataset_path(const std::string& split) const;
    std::string scaler_path() const;
    std::string prepare_report_path() const;
    std::string checkpoint_path(const std::string& family) const;
    std::string history_path(const std::string& family) const;
    std::string metrics_report_path(const std::string& family) const;
    std::string metrics_table_path() const;
    std::string series_path(const std::string& family) const;
    std::string benchmark_table_path() const;
    std::string benchmark_report_path() const;

    std::string resolved_input_csv() const;
};

struct SynthSummary {
    std::string csv_path;
    std::string ground_truth_path;
    std::size_t steps = 0;
    std::size_t gaps = 0;
};

struct PrepareSummary {
    std::size_t ingested_rows = 0;
    std::size_t valid_rows = 0;
    std::size_t grid_rows = 0;
    std::size_t gaps_found = 0;
    std::size_t gaps_filled = 0;
    std::size_t points_filled = 0;
    std::vector<ContinuousSegment> segments;
    std::vector<std::int64_t> segment_start_ts;
    std::size_t total_windows = 0;
    std::size_t train_samples = 0;
    std::size_t val_samples = 0;
    std::size_t test_samples = 0;
};

struct TrainSummary {
    std::string family;
    std::string checkpoint_path;
    std::string history_path;
    TrainHistory history;
    std::size_t best_epoch = 0;
    bool early_stopped = false;
    std::size_t param_count = 0;
};

struct FamilyResult {
    std::string family;
    std::size_t param_count = 0;
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double wall_seconds = 0.0;
    double mean_epoch_seconds = 0.0;
    MetricsReport report;
};

struct BenchmarkSummary {
    std::vector<FamilyResult> results;  // completed families, lstm/gru/cnn_lstm order
    std::string table_path;
    std::string report_path;
};

/// Generate the synthetic dataset and its ground-truth log.
SynthSummary cmd_synth(const RunConfig& config);

/// Run the preprocessing chain (ingest -> regularize -> interpolate ->
/// segments -> scaler -> windows -> split) and write the dataset binaries,
/// scaler sidecar and preparation report.
PrepareSummary cmd_prepare(const RunConfig& config);

/// Train the configured family on the prepared artifacts; write checkpoint
/// and history CSV.
TrainSummary cmd_train(const RunConfig& config);

/// Evaluate a checkpoint on the prepared test split; write the metrics
/// report, a table CSV and (optionally) the prediction series export.
MetricsReport cmd_evaluate(const RunConfig& config, const std::string& checkpoint = "");

/// Train and evaluate all three families under identical data and seeds;
/// write the combined table plus a wall-time/parameter-count report. A
/// failing family propagates after completed families are recorded.
BenchmarkSummary cmd_benchmark(const RunConfig& config);

}  // namespace ieq::cli

#endif  // IEQ_CLI_HPP
