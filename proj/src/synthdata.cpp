#include "ieq/synthdata.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "ieq/errors.hpp"
#include "ieq/rng.hpp"

namespace ieq {

namespace {
constexpr std::size_t kStepsPerDay = 288;
constexpr double kTwoPi = 6.283185307179586476925286766559;
}  // namespace

void SynthConfig::validate() const {
    if (days < 1) throw ConfigError("SynthConfig: days must be >= 1");
    if (temperature_amplitude < 0 || humidity_amplitude < 0 || noise_temperature < 0 ||
        noise_co2 < 0 || noise_humidity < 0) {
        throw ConfigError("SynthConfig: amplitudes and noise sigmas must be >= 0");
    }
    if (co2_baseline < 0) throw ConfigError("SynthConfig: co2_baseline must be >= 0");
    if (co2_decay_steps <= 0) throw ConfigError("SynthConfig: co2_decay_steps must be > 0");
    if (gap_rate_per_day < 0 || co2_event_rate_per_day < 0) {
        throw ConfigError("SynthConfig: rates must be >= 0");
    }
    if (gap_min_steps < 1 || gap_max_steps < gap_min_steps) {
        throw ConfigError("SynthConfig: gap length range is invalid");
    }
}

std::pair<TimeSeriesFrame, GroundTruthLog> generate(const SynthConfig& config) {
    config.validate();
    const std::size_t n = config.days * kStepsPerDay;

    TimeSeriesFrame frame;
    GroundTruthLog log;
    frame.timestamps.resize(n);
    frame.valid.assign(n, 1);
    for (auto& ch : frame.channels) ch.resize(n);
    for (auto& ch : log.noiseless) ch.resize(n);

    // Signal and noise stream.
    CounterRng rng(config.seed, 0);
    const double event_p = config.co2_event_rate_per_day / static_cast<double>(kStepsPerDay);
    const double decay = std::exp(-1.0 / config.co2_decay_steps);
    double pulse_level = 0.0;

    for (std::size_t step = 0; step < n; ++step) {
        frame.timestamps[step] =
            config.start_epoch + static_cast<std::int64_t>(step) * kStepSeconds;
        const double phase =
            kTwoPi * static_cast<double>(step % kStepsPerDay) / static_cast<double>(kStepsPerDay);

        const bool event = rng.uniform() < event_p;
        pulse_level = pulse_level * decay + (event ? config.co2_event_magnitude : 0.0);

        const double temp_clean =
            config.temperature_base + config.temperature_amplitude * std::sin(phase);
        const double co2_clean = config.co2_baseline + pulse_level;
        const double hum_clean =
            config.humidity_base + config.humidity_amplitude * std::cos(phase);

        log.noiseless[0][step] = temp_clean;
        log.noiseless[1][step] = co2_clean;
        log.noiseless[2][step] = hum_clean;

        frame.channels[0][step] = temp_clean + config.noise_temperature * rng.normal();
        frame.channels[1][step] = co2_clean + config.noise_co2 * rng.normal();
        frame.channels[2][step] = hum_clean + config.noise_humidity * rng.normal();
    }

    // Gap stream is independent of the signal stream so changing the gap
    // model never perturbs the signal values.
    CounterRng gap_rng(config.seed, 1);
    const double gap_p = config.gap_rate_per_day / static_cast<double>(kStepsPerDay);
    for (std::size_t step = 0; step < n; ++step) {
        if (gap_rng.uniform() >= gap_p) continue;
        const std::size_t len =
            config.gap_min_steps +
            gap_rng.uniform_int(config.gap_max_steps - config.gap_min_steps + 1);
        for (std::size_t k = step; k < std::min(n, step + len); ++k) frame.valid[k] = 0;
    }
    for (std::size_t step = 0; step < n; ++step) {
        if (!frame.valid[step]) {
            for (auto& ch : frame.channels) ch[step] = std::numeric_limits<double>::quiet_NaN();
        }
    }

    // Exact gap positions: maximal invalid runs of the final mask.
    std::size_t i = 0;
    while (i < n) {
        if (frame.valid[i]) {
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end + 1 < n && !frame.valid[end + 1]) ++end;
        log.gaps.push_back({i, end - i + 1});
        i = end + 1;
    }
    return {std::move(frame), std::move(log)};
}

void write_ground_truth(const GroundTruthLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_ground_truth: cannot open " + path);
    out << "IEQG1\n";
    out << "steps " << log.noiseless[0].size() << "\n";
    out << "gaps " << log.gaps.size() << "\n";
    for (const auto& gap : log.gaps) {
        out << "gap " << gap.start_step << " " << gap.length << "\n";
    }
    char buf[160];
    for (std::size_t i = 0; i < log.noiseless[0].size(); ++i) {
        std::snprintf(buf, sizeof(buf), "noiseless %.17g %.17g %.17g\n", log.noiseless[0][i],
                      log.noiseless[1][i], log.noiseless[2][i]);
        out << buf;
    }
    if (!out) throw IoError("write_ground_truth: write failed for " + path);
}

GroundTruthLog read_ground_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_ground_truth: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "IEQG1") {
        throw DataError("read_ground_truth: " + path + " is not an IEQG1 log");
    }
    GroundTruthLog log;
    std::size_t steps = 0, gaps = 0;
    std::string key;
    in >> key >> steps;
    if (key != "steps") throw DataError("read_ground_truth: malformed header in " + path);
    in >> key >> gaps;
    if (key != "gaps") throw DataError("read_ground_truth: malformed header in " + path);
    for (std::size_t g = 0; g < gaps; ++g) {
        GroundTruthLog::Gap gap{};
        in >> key >> gap.start_step >> gap.length;
        if (!in || key != "gap") throw DataError("read_ground_truth: malformed gap row");
        log.gaps.push_back(gap);
    }
    for (auto& ch : log.noiseless) ch.resize(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        in >> key >> log.noiseless[0][i] >> log.noiseless[1][i] >> log.noiseless[2][i];
        if (!in || key != "noiseless") {
            throw DataError("read_ground_truth: malformed noiseless row");
        }
    }
    return log;
}

}  // namespace ieq
