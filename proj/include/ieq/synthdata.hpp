#ifndef IEQ_SYNTHDATA_HPP
#define IEQ_SYNTHDATA_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ieq/timeseries.hpp"

namespace ieq {

/**
 * Seeded generator of room-like sensor series with known ground truth:
 * sinusoidal daily temperature and humidity cycles, a CO2 baseline plus
 * exponentially decaying occupancy pulses, Gaussian sensor noise, and
 * randomly injected gaps. 288 steps per day on the 5-minute grid.
 */
struct SynthConfig {
    std::size_t days = 14;
    std::uint64_t seed = 7;
    std::int64_t start_epoch = 1704067200;  // 2024-01-01 00:00:00

    double temperature_base = 22.0;       // degC
    double temperature_amplitude = 4.0;

    double co2_baseline = 400.0;          // ppm
    double co2_event_rate_per_day = 4.0;  // occupancy pulse onsets
    double co2_event_magnitude = 300.0;   // ppm per pulse
    double co2_decay_steps = 72.0;        // exponential decay constant

    double humidity_base = 55.0;          // %RH
    double humidity_amplitude = 10.0;

    double noise_temperature = 0.1;
    double noise_co2 = 5.0;
    double noise_humidity = 0.3;

    double gap_rate_per_day = 0.5;  // gap onsets per day
    std::size_t gap_min_steps = 1;
    std::size_t gap_max_steps = 3;

    void validate() const;
};

/// Noiseless signals for every step plus the exact injected gap positions.
struct GroundTruthLog {
    std::array<std::vector<double>, kNumChannels> noiseless;

    struct Gap {
        std::size_t start_step;
        std::size_t length;
    };
    std::vector<Gap> gaps;  // maximal invalid runs, chronological
};

std::pair<TimeSeriesFrame, GroundTruthLog> generate(const SynthConfig& config);

void write_ground_truth(const GroundTruthLog& log, const std::string& path);
GroundTruthLog read_ground_truth(const std::string& path);

}  // namespace ieq

#endif  // IEQ_SYNTHDATA_HPP
