#ifndef IEQ_TIMESERIES_HPP
#define IEQ_TIMESERIES_HPP

#include <array>
#include <cstdint>
#include <cstddef>
#include <vector>

namespace ieq {

/// Nominal sampling interval of the sensor grid.
inline constexpr std::int64_t kStepSeconds = 300;

inline constexpr std::size_t kNumChannels = 3;

/// Channel order used everywhere: temperature, co2, humidity.
inline constexpr std::array<const char*, kNumChannels> kChannelNames = {
    "air_temperature", "indoor_co2", "relative_humidity"};

/// Physical plausibility ranges per channel (degC, ppm, %RH).
inline constexpr std::array<double, kNumChannels> kChannelMin = {-40.0, 0.0, 0.0};
inline constexpr std::array<double, kNumChannels> kChannelMax = {60.0, 10000.0, 100.0};

/**
 * Timestamped multi-channel sensor record set. Timestamps are strictly
 * increasing naive epoch seconds; `valid[i]` marks rows whose three channel
 * values all parsed, are finite, and lie inside the physical ranges.
 * Invalid rows keep NaN placeholders in the channel arrays.
 */
struct TimeSeriesFrame {
    std::vector<std::int64_t> timestamps;
    std::array<std::vector<double>, kNumChannels> channels;
    std::vector<std::uint8_t> valid;

    std::size_t size() const { return timestamps.size(); }
    bool empty() const { return timestamps.empty(); }
    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto v : valid) n += v != 0;
        return n;
    }
};

/// Inclusive index range of a frame in which every point is valid and
/// consecutive timestamps differ by exactly kStepSeconds.
struct ContinuousSegment {
    std::size_t start_index = 0;
    std::size_t end_index = 0;

    std::size_t length() const { return end_index - start_index + 1; }
};

}  // namespace ieq

#endif  // IEQ_TIMESERIES_HPP
