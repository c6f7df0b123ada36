#ifndef IEQ_PIPELINE_HPP
#define IEQ_PIPELINE_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ieq/timeseries.hpp"

namespace ieq {

/// Maps the toolkit's channel roles onto the column names of an input CSV.
/// Defaults match the CSV the synthetic generator writes.
struct CsvSchema {
    std::string timestamp = "timestamp";
    std::string temperature = "air_temperature";
    std::string co2 = "indoor_co2";
    std::string humidity = "relative_humidity";
};

/**
 * Read a sensor CSV (UTF-8, header row, comma-separated) into a frame.
 * Rows are sorted by time and duplicate timestamps collapsed keeping the
 * first occurrence. Cells that fail to parse, are non-finite, or fall
 * outside the physical channel ranges flag the row invalid.
 * Throws SchemaError when a mapped column is absent, DataError when the
 * file has no data rows or a timestamp cannot be parsed.
 */
TimeSeriesFrame ingest_csv(const std::string& path, const CsvSchema& schema = {});

/**
 * Snap timestamps to the nearest 5-minute grid point, discarding points
 * whose snap distance exceeds 60 s, and insert invalid placeholder rows at
 * grid points with no observation so gaps become explicit.
 */
TimeSeriesFrame regularize(const TimeSeriesFrame& frame);

/**
 * Fill each maximal run of at most `max_gap_steps` invalid points that has
 * at least two valid points on each side. Per channel, the fill is the
 * cubic through the four nearest bracketing valid points; longer runs and
 * edge runs are left untouched. Filled points become valid.
 */
TimeSeriesFrame interpolate_short_gaps(const TimeSeriesFrame& frame,
                                       std::size_t max_gap_steps = 6);

/**
 * Maximal runs of valid, step-contiguous points with length >= min_length,
 * in chronological order. min_length must be at least window+horizon = 13
 * so each segment yields at least one supervised window.
 */
std::vector<ContinuousSegment> extract_segments(const TimeSeriesFrame& frame,
                                                std::size_t min_length);

struct CyclicalFeatures {
    double day_sin;
    double day_cos;
    double month_sin;
    double month_cos;
};

/// Sine/cosine encoding of time-of-day and calendar month, so 23:59 and
/// 00:00 (and December/January) are numerically adjacent.
CyclicalFeatures encode_cyclical(std::int64_t epoch_seconds);

/// Model feature order: the 3 sensor channels then the 4 cyclical features.
inline constexpr std::size_t kNumFeatures = 7;
inline constexpr std::array<const char*, kNumFeatures> kFeatureNames = {
    "air_temperature", "indoor_co2", "relative_humidity",
    "day_sin",         "day_cos",    "month_sin",
    "month_cos"};

inline constexpr std::size_t kDefaultWindow = 12;
inline constexpr std::size_t kDefaultHorizon = 1;
inline constexpr std::size_t kNumTargets = 3;

/**
 * Per-feature min/max [0,1] normalization with exact inversion. Sensor
 * channel ranges are fitted on the rows covered by training input windows
 * only; cyclical features use the fixed range [-1, 1]. A constant feature
 * stores span 1 (every training value maps to 0) and is flagged degenerate.
 */
class Scaler {
public:
    Scaler();

    static Scaler fit(const TimeSeriesFrame& frame,
                      const std::vector<ContinuousSegment>& segments,
                      double train_fraction,
                      std::size_t window = kDefaultWindow,
                      std::size_t horizon = kDefaultHorizon);

    /// Build from explicit parameters (used when loading a sidecar file).
    static Scaler from_params(const std::array<double, kNumFeatures>& mins,
                              const std::array<double, kNumFeatures>& maxs);

    double transform(std::size_t feature, double value) const;
    double inverse_transform(std::size_t feature, double value) const;

    double feature_min(std::size_t feature) const { return min_[feature]; }
    double feature_max(std::size_t feature) const { return max_[feature]; }
    bool degenerate(std::size_t feature) const { return degenerate_[feature]; }

    bool operator==(const Scaler& other) const;

private:
    std::array<double, kNumFeatures> min_;
    std::array<double, kNumFeatures> max_;
    std::array<double, kNumFeatures> span_;
    std::array<bool, kNumFeatures> degenerate_;

    void finalize_spans();
};

/**
 * Supervised samples: normalized input windows of `window` steps x
 * kNumFeatures features and 3-value next-step targets, ordered
 * chronologically. `sample_timestamps` holds each sample's target time.
 */
struct WindowedDataset {
    std::size_t window = kDefaultWindow;
    std::size_t features = kNumFeatures;
    std::vector<double> inputs;               // samples * window * features
    std::vector<double> targets;              // samples * kNumTargets
    std::vector<std::int64_t> sample_timestamps;

    std::size_t samples() const { return sample_timestamps.size(); }

    std::span<const double> input(std::size_t i) const {
        return {inputs.data() + i * window * features, window * features};
    }
    std::span<const double> target(std::size_t i) const {
        return {targets.data() + i * kNumTargets, kNumTargets};
    }

    /// Copy of samples [begin, end).
    WindowedDataset slice(std::size_t begin, std::size_t end) const;
};

/**
 * Build all supervised windows: for each segment and each valid offset the
 * input covers `window` consecutive steps and the target is the 3 sensor
 * channels `horizon` steps later, both scaler-normalized. Throws DataError
 * when no segment is long enough.
 */
WindowedDataset make_windows(const TimeSeriesFrame& frame,
                             const std::vector<ContinuousSegment>& segments,
                             const Scaler& scaler,
                             std::size_t window = kDefaultWindow,
                             std::size_t horizon = kDefaultHorizon);

struct SplitDataset {
    WindowedDataset train;
    WindowedDataset validation;
    WindowedDataset test;
};

/**
 * Contiguous chronological slices sized floor(train_frac*N) and
 * floor(val_frac*N), the remainder going to test. No shuffling. Throws
 * ConfigError when the fractions do not sum to 1 or any slice is empty.
 */
SplitDataset chronological_split(const WindowedDataset& dataset, double train_frac,
                                 double val_frac, double test_frac);

/// floor(N * fraction) computed exactly for fractions with up to six
/// decimal places (avoids 0.85*1000 -> 849 style representation slips).
std::size_t split_floor(std::size_t n, double fraction);

}  // namespace ieq

#endif  // IEQ_PIPELINE_HPP
