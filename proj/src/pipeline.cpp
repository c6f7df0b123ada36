#include "ieq/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "ieq/errors.hpp"
#include "ieq/time_util.hpp"

namespace ieq {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kTwoPi = 6.283185307179586476925286766559;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

// Splits one CSV line, honoring double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// NaN on empty or malformed cells.
double parse_cell(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) return kNan;
    const char* begin = s.data();
    const char* end = begin + s.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end) return kNan;
    return v;
}

bool in_channel_range(std::size_t channel, double v) {
    return std::isfinite(v) && v >= kChannelMin[channel] && v <= kChannelMax[channel];
}

}  // namespace

// ---------------------------------------------------------------------------
// ingest_csv
// ---------------------------------------------------------------------------

TimeSeriesFrame ingest_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("ingest_csv: cannot open " + path);

    std::string header_line;
    if (!std::getline(in, header_line)) {
        throw DataError("ingest_csv: " + path + " is empty");
    }
    // Strip a UTF-8 BOM if present.
    if (header_line.size() >= 3 && header_line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        header_line.erase(0, 3);
    }

    const std::vector<std::string> header = split_csv_line(header_line);
    auto column_of = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == name) return i;
        }
        throw SchemaError("ingest_csv: column '" + name + "' not found in " + path);
    };

    const std::size_t ts_col = column_of(schema.timestamp);
    const std::array<std::size_t, kNumChannels> chan_col = {
        column_of(schema.temperature), column_of(schema.co2), column_of(schema.humidity)};

    struct Row {
        std::int64_t ts;
        std::array<double, kNumChannels> values;
        bool valid;
    };
    std::vector<Row> rows;

    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() <= ts_col) {
            throw DataError("ingest_csv: " + path + ":" + std::to_string(line_no) +
                            ": too few fields");
        }
        Row row{};
        if (!time_util::parse_timestamp(fields[ts_col], row.ts)) {
            throw DataError("ingest_csv: " + path + ":" + std::to_string(line_no) +
                            ": unparseable timestamp '" + fields[ts_col] + "'");
        }
        row.valid = true;
        for (std::size_t c = 0; c < kNumChannels; ++c) {
            const double v =
                chan_col[c] < fields.size() ? parse_cell(fields[chan_col[c]]) : kNan;
            if (in_channel_range(c, v)) {
                row.values[c] = v;
            } else {
                row.values[c] = kNan;
                row.valid = false;
            }
        }
        rows.push_back(row);
    }
    if (rows.empty()) throw DataError("ingest_csv: " + path + " has no data rows");

    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.ts < b.ts; });

    TimeSeriesFrame frame;
    for (const Row& row : rows) {
        if (!frame.timestamps.empty() && frame.timestamps.back() == row.ts) continue;
        frame.timestamps.push_back(row.ts);
        for (std::size_t c = 0; c < kNumChannels; ++c) frame.channels[c].push_back(row.values[c]);
        frame.valid.push_back(row.valid ? 1 : 0);
    }
    return frame;
}

// ---------------------------------------------------------------------------
// regularize
// ---------------------------------------------------------------------------

TimeSeriesFrame regularize(const TimeSeriesFrame& frame) {
    if (frame.empty()) throw std::invalid_argument("regularize: frame is empty");

    struct Snapped {
        std::int64_t grid;
        std::size_t source;
    };
    std::vector<Snapped> kept;
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const std::int64_t t = frame.timestamps[i];
        const std::int64_t grid = floor_div(t + kStepSeconds / 2, kStepSeconds) * kStepSeconds;
        if (std::llabs(t - grid) > 60) continue;
        // First observation wins when several snap to the same grid point.
        if (!kept.empty() && kept.back().grid == grid) continue;
        kept.push_back({grid, i});
    }
    if (kept.empty()) throw DataError("regularize: no point within 60 s of the 5-minute grid");

    TimeSeriesFrame out;
    const std::int64_t first = kept.front().grid;
    const std::int64_t last = kept.back().grid;
    const std::size_t n = static_cast<std::size_t>((last - first) / kStepSeconds) + 1;
    out.timestamps.resize(n);
    out.valid.assign(n, 0);
    for (auto& ch : out.channels) ch.assign(n, kNan);
    for (std::size_t i = 0; i < n; ++i) {
        out.timestamps[i] = first + static_cast<std::int64_t>(i) * kStepSeconds;
    }
    for (const Snapped& s : kept) {
        const std::size_t idx = static_cast<std::size_t>((s.grid - first) / kStepSeconds);
        for (std::size_t c = 0; c < kNumChannels; ++c) {
            out.channels[c][idx] = frame.channels[c][s.source];
        }
        out.valid[idx] = frame.valid[s.source];
    }
    return out;
}

// ---------------------------------------------------------------------------
// interpolate_short_gaps
// ---------------------------------------------------------------------------

namespace {

// The cubic through four points, evaluated with the Lagrange basis. With
// exactly four support points the least-squares order-3 fit is this
// interpolant.
double cubic_through(const std::array<double, 4>& xs, const std::array<double, 4>& ys,
                     double x) {
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
        double term = ys[i];
        for (int j = 0; j < 4; ++j) {
            if (j == i) continue;
            term *= (x - xs[j]) / (xs[i] - xs[j]);
        }
        acc += term;
    }
    return acc;
}

}  // namespace

TimeSeriesFrame interpolate_short_gaps(const TimeSeriesFrame& frame,
                                       std::size_t max_gap_steps) {
    TimeSeriesFrame out = frame;
    const std::size_t n = frame.size();
    // Neighbor lookup uses the pre-pass validity so the result does not
    // depend on fill order.
    const std::vector<std::uint8_t>& was_valid = frame.valid;

    std::size_t i = 0;
    while (i < n) {
        if (was_valid[i]) {
            ++i;
            continue;
        }
        std::size_t run_end = i;
        while (run_end + 1 < n && !was_valid[run_end + 1]) ++run_end;
        const std::size_t run_len = run_end - i + 1;

        if (run_len <= max_gap_steps) {
            // Two nearest valid points on each side.
            std::array<std::size_t, 4> support{};
            int found_left = 0;
            for (std::size_t j = i; j-- > 0 && found_left < 2;) {
                if (was_valid[j]) support[1 - found_left++] = j;
            }
            int found_right = 0;
            for (std::size_t j = run_end + 1; j < n && found_right < 2; ++j) {
                if (was_valid[j]) support[2 + found_right++] = j;
            }
            if (found_left == 2 && found_right == 2) {
                std::array<double, 4> xs{};
                const double x0 = static_cast<double>(frame.timestamps[i]);
                for (int s = 0; s < 4; ++s) {
                    xs[s] = (static_cast<double>(frame.timestamps[support[s]]) - x0) /
                            static_cast<double>(kStepSeconds);
                }
                for (std::size_t c = 0; c < kNumChannels; ++c) {
                    std::array<double, 4> ys{};
                    for (int s = 0; s < 4; ++s) ys[s] = frame.channels[c][support[s]];
                    for (std::size_t h = i; h <= run_end; ++h) {
                        const double x = (static_cast<double>(frame.timestamps[h]) - x0) /
                                         static_cast<double>(kStepSeconds);
                        const double fill = cubic_through(xs, ys, x);
                        out.channels[c][h] =
                            std::clamp(fill, kChannelMin[c], kChannelMax[c]);
                    }
                }
                for (std::size_t h = i; h <= run_end; ++h) out.valid[h] = 1;
            }
        }
        i = run_end + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// extract_segments
// ---------------------------------------------------------------------------

std::vector<ContinuousSegment> extract_segments(const TimeSeriesFrame& frame,
                                                std::size_t min_length) {
    if (min_length < kDefaultWindow + kDefaultHorizon) {
        throw ConfigError("extract_segments: min_length must be >= " +
                          std::to_string(kDefaultWindow + kDefaultHorizon));
    }
    std::vector<ContinuousSegment> segments;
    std::size_t i = 0;
    const std::size_t n = frame.size();
    while (i < n) {
        if (!frame.valid[i]) {
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end + 1 < n && frame.valid[end + 1] &&
               frame.timestamps[end + 1] - frame.timestamps[end] == kStepSeconds) {
            ++end;
        }
        if (end - i + 1 >= min_length) segments.push_back({i, end});
        i = end + 1;
    }
    return segments;
}

// ---------------------------------------------------------------------------
// encode_cyclical
// ---------------------------------------------------------------------------

CyclicalFeatures encode_cyclical(std::int64_t epoch_seconds) {
    const double sod = static_cast<double>(time_util::seconds_into_day(epoch_seconds));
    const double day_phase = kTwoPi * sod / 86400.0;
    const int month = time_util::month_of(epoch_seconds);
    const double month_phase = kTwoPi * static_cast<double>(month - 1) / 12.0;
    return {std::sin(day_phase), std::cos(day_phase), std::sin(month_phase),
            std::cos(month_phase)};
}

// ---------------------------------------------------------------------------
// Scaler
// ---------------------------------------------------------------------------

Scaler::Scaler() {
    min_.fill(0.0);
    max_.fill(1.0);
    degenerate_.fill(false);
    finalize_spans();
}

void Scaler::finalize_spans() {
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        degenerate_[f] = max_[f] == min_[f];
        span_[f] = degenerate_[f] ? 1.0 : max_[f] - min_[f];
    }
}

Scaler Scaler::from_params(const std::array<double, kNumFeatures>& mins,
                           const std::array<double, kNumFeatures>& maxs) {
    Scaler s;
    s.min_ = mins;
    s.max_ = maxs;
    s.finalize_spans();
    return s;
}

Scaler Scaler::fit(const TimeSeriesFrame& frame,
                   const std::vector<ContinuousSegment>& segments, double train_fraction,
                   std::size_t window, std::size_t horizon) {
    if (segments.empty()) throw std::invalid_argument("Scaler::fit: no segments");

    std::size_t total_samples = 0;
    for (const auto& seg : segments) {
        if (seg.length() >= window + horizon) total_samples += seg.length() - window - horizon + 1;
    }
    const std::size_t train_samples = split_floor(total_samples, train_fraction);
    if (train_samples == 0) throw ConfigError("Scaler::fit: training split is empty");

    std::array<double, kNumFeatures> mins;
    std::array<double, kNumFeatures> maxs;
    mins.fill(std::numeric_limits<double>::infinity());
    maxs.fill(-std::numeric_limits<double>::infinity());

    // Min/max over exactly the rows covered by training input windows: the
    // first k samples of a segment cover its first k+window-1 rows.
    std::size_t remaining = train_samples;
    for (const auto& seg : segments) {
        if (remaining == 0) break;
        const std::size_t seg_samples =
            seg.length() >= window + horizon ? seg.length() - window - horizon + 1 : 0;
        const std::size_t take = std::min(remaining, seg_samples);
        if (take == 0) continue;
        const std::size_t row_count = take + window - 1;
        for (std::size_t r = seg.start_index; r < seg.start_index + row_count; ++r) {
            for (std::size_t c = 0; c < kNumChannels; ++c) {
                const double v = frame.channels[c][r];
                mins[c] = std::min(mins[c], v);
                maxs[c] = std::max(maxs[c], v);
            }
        }
        remaining -= take;
    }

    // Cyclical features carry their analytic range.
    for (std::size_t f = kNumChannels; f < kNumFeatures; ++f) {
        mins[f] = -1.0;
        maxs[f] = 1.0;
    }
    return from_params(mins, maxs);
}

double Scaler::transform(std::size_t feature, double value) const {
    return (value - min_[feature]) / span_[feature];
}

double Scaler::inverse_transform(std::size_t feature, double value) const {
    return value * span_[feature] + min_[feature];
}

bool Scaler::operator==(const Scaler& other) const {
    return min_ == other.min_ && max_ == other.max_;
}

// ---------------------------------------------------------------------------
// make_windows / chronological_split
// ---------------------------------------------------------------------------

WindowedDataset make_windows(const TimeSeriesFrame& frame,
                             const std::vector<ContinuousSegment>& segments,
                             const Scaler& scaler, std::size_t window, std::size_t horizon) {
    WindowedDataset ds;
    ds.window = window;
    ds.features = kNumFeatures;

    std::size_t total = 0;
    for (const auto& seg : segments) {
        if (seg.length() >= window + horizon) total += seg.length() - window - horizon + 1;
    }
    if (total == 0) {
        throw DataError("make_windows: no segment is long enough for window " +
                        std::to_string(window) + " + horizon " + std::to_string(horizon));
    }
    ds.inputs.reserve(total * window * kNumFeatures);
    ds.targets.reserve(total * kNumTargets);
    ds.sample_timestamps.reserve(total);

    for (const auto& seg : segments) {
        if (seg.length() < window + horizon) continue;
        const std::size_t samples = seg.length() - window - horizon + 1;
        for (std::size_t offset = 0; offset < samples; ++offset) {
            const std::size_t base = seg.start_index + offset;
            for (std::size_t step = 0; step < window; ++step) {
                const std::size_t row = base + step;
                for (std::size_t c = 0; c < kNumChannels; ++c) {
                    ds.inputs.push_back(scaler.transform(c, frame.channels[c][row]));
                }
                const CyclicalFeatures cyc = encode_cyclical(frame.timestamps[row]);
                ds.inputs.push_back(scaler.transform(3, cyc.day_sin));
                ds.inputs.push_back(scaler.transform(4, cyc.day_cos));
                ds.inputs.push_back(scaler.transform(5, cyc.month_sin));
                ds.inputs.push_back(scaler.transform(6, cyc.month_cos));
            }
            const std::size_t target_row = base + window + horizon - 1;
            for (std::size_t c = 0; c < kNumTargets; ++c) {
                ds.targets.push_back(scaler.transform(c, frame.channels[c][target_row]));
            }
            ds.sample_timestamps.push_back(frame.timestamps[target_row]);
        }
    }
    return ds;
}

WindowedDataset WindowedDataset::slice(std::size_t begin, std::size_t end) const {
    WindowedDataset out;
    out.window = window;
    out.features = features;
    const std::size_t stride = window * features;
    out.inputs.assign(inputs.begin() + begin * stride, inputs.begin() + end * stride);
    out.targets.assign(targets.begin() + begin * kNumTargets, targets.begin() + end * kNumTargets);
    out.sample_timestamps.assign(sample_timestamps.begin() + begin,
                                 sample_timestamps.begin() + end);
    return out;
}

std::size_t split_floor(std::size_t n, double fraction) {
    const std::int64_t millionths = std::llround(fraction * 1e6);
    return static_cast<std::size_t>(
        (static_cast<std::int64_t>(n) * millionths) / 1000000);
}

SplitDataset chronological_split(const WindowedDataset& dataset, double train_frac,
                                 double val_frac, double test_frac) {
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
        throw ConfigError("chronological_split: fractions must sum to 1");
    }
    const std::size_t n = dataset.samples();
    if (n == 0) throw std::invalid_argument("chronological_split: dataset is empty");

    const std::size_t n_train = split_floor(n, train_frac);
    const std::size_t n_val = split_floor(n, val_frac);
    const std::size_t n_test = n - n_train - n_val;
    if (n_train == 0 || n_val == 0 || n_test == 0) {
        throw ConfigError("chronological_split: split " + std::to_string(n_train) + "/" +
                          std::to_string(n_val) + "/" + std::to_string(n_test) +
                          " has an empty slice (N=" + std::to_string(n) + ")");
    }
    SplitDataset out;
    out.train = dataset.slice(0, n_train);
    out.validation = dataset.slice(n_train, n_train + n_val);
    out.test = dataset.slice(n_train + n_val, n);
    return out;
}

}  // namespace ieq
