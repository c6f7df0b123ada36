#ifndef IEQ_EVALUATION_HPP
#define IEQ_EVALUATION_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ieq/matrix.hpp"
#include "ieq/models.hpp"
#include "ieq/pipeline.hpp"

namespace ieq {

/// One metric tuple. r2 is absent when the target has zero variance.
struct TargetMetrics {
    double mae = 0.0;
    double mse = 0.0;
    double rmse = 0.0;
    std::optional<double> r2;
};

/**
 * Per-target and global MAE/MSE/RMSE/R2 in original units, mirroring the
 * benchmark table layout: rows are metrics, column groups are
 * Global / Temperature / CO2 / Humidity.
 */
struct MetricsReport {
    std::array<TargetMetrics, kNumTargets> per_target;  // temperature, co2, humidity
    TargetMetrics global;
    std::size_t sample_count = 0;
    std::string model;
    std::uint64_t model_seed = 0;
    std::uint64_t shuffle_seed = 0;
};

/**
 * Inverse-transform normalized predictions/targets (columns = the three
 * sensor channels) to original units and compute mae, mse, rmse = sqrt(mse)
 * and r2 = 1 - SSE/SST about the test-set mean, per column.
 */
std::array<TargetMetrics, kNumTargets> per_target_metrics(const Matrix& predictions,
                                                          const Matrix& targets,
                                                          const Scaler& scaler);

/// Global mae/mse/r2 are arithmetic means of the per-target values;
/// global rmse = sqrt(global mse).
TargetMetrics aggregate_global(const std::array<TargetMetrics, kNumTargets>& per_target);

/// Run the model over every sample of the set and build the report.
/// Throws std::invalid_argument when dataset features do not match params.
MetricsReport evaluate(const ModelParams& params, const WindowedDataset& test,
                       const Scaler& scaler);

/// Matrix of model predictions (normalized), one row per sample.
Matrix predict_all(const ModelParams& params, const WindowedDataset& ds);

/**
 * CSV of (timestamp, truth, prediction) per target in original units, one
 * row per test sample, chronological.
 */
void export_series(const ModelParams& params, const WindowedDataset& test,
                   const Scaler& scaler, const std::string& path);

/// Structured text report, one document per run.
void write_metrics_report(const MetricsReport& report, const std::string& path);

/// Benchmark-table CSV: metric rows x (Global|Temperature|CO2|Humidity) x model
/// column groups.
void write_metrics_table(const std::vector<MetricsReport>& reports, const std::string& path);
std::string metrics_table_csv(const std::vector<MetricsReport>& reports);

/**
 * MAE per target, in original units, of the persistence forecaster that
 * predicts the last observed value of each channel.
 */
std::array<double, kNumTargets> persistence_mae(const WindowedDataset& ds,
                                                const Scaler& scaler);

}  // namespace ieq

#endif  // IEQ_EVALUATION_HPP
