#include "ieq/dataset_io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "ieq/errors.hpp"
#include "ieq/time_util.hpp"

namespace ieq {

namespace {

constexpr char kDatasetMagic[5] = {'I', 'E', 'Q', 'W', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(buf, 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

std::string full_precision(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_dataset(const WindowedDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_dataset: cannot open " + path);
    out.write(kDatasetMagic, sizeof(kDatasetMagic));
    put_u64(out, ds.samples());
    put_u64(out, ds.window);
    put_u64(out, ds.features);
    put_u64(out, kNumTargets);
    for (double v : ds.inputs) put_f64(out, v);
    for (double v : ds.targets) put_f64(out, v);
    for (std::int64_t t : ds.sample_timestamps) put_f64(out, static_cast<double>(t));
    if (!out) throw IoError("write_dataset: write failed for " + path);
}

WindowedDataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_dataset: cannot open " + path);
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, kDatasetMagic, 5) != 0) {
        throw DataError("read_dataset: " + path + " is not an IEQW1 dataset");
    }
    WindowedDataset ds;
    const std::uint64_t samples = get_u64(in);
    ds.window = get_u64(in);
    ds.features = get_u64(in);
    const std::uint64_t targets = get_u64(in);
    if (targets != kNumTargets) {
        throw DataError("read_dataset: unexpected target count " + std::to_string(targets));
    }
    ds.inputs.resize(samples * ds.window * ds.features);
    ds.targets.resize(samples * kNumTargets);
    ds.sample_timestamps.resize(samples);
    for (double& v : ds.inputs) v = get_f64(in);
    for (double& v : ds.targets) v = get_f64(in);
    for (std::int64_t& t : ds.sample_timestamps) {
        t = static_cast<std::int64_t>(get_f64(in));
    }
    if (!in) throw DataError("read_dataset: " + path + " is truncated");
    return ds;
}

void write_scaler(const Scaler& scaler, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_scaler: cannot open " + path);
    out << "IEQS1\n";
    out << "features " << kNumFeatures << "\n";
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        out << kFeatureNames[f] << " " << full_precision(scaler.feature_min(f)) << " "
            << full_precision(scaler.feature_max(f)) << " " << (scaler.degenerate(f) ? 1 : 0)
            << "\n";
    }
    if (!out) throw IoError("write_scaler: write failed for " + path);
}

Scaler read_scaler(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_scaler: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "IEQS1") {
        throw DataError("read_scaler: " + path + " is not an IEQS1 sidecar");
    }
    std::size_t features = 0;
    {
        std::string word;
        in >> word >> features;
        if (word != "features" || features != kNumFeatures) {
            throw DataError("read_scaler: unexpected feature count in " + path);
        }
    }
    std::array<double, kNumFeatures> mins{};
    std::array<double, kNumFeatures> maxs{};
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        std::string name;
        int degenerate = 0;
        in >> name >> mins[f] >> maxs[f] >> degenerate;
        if (!in || name != kFeatureNames[f]) {
            throw DataError("read_scaler: malformed row for feature " + std::to_string(f) +
                            " in " + path);
        }
    }
    return Scaler::from_params(mins, maxs);
}

void write_frame_csv(const TimeSeriesFrame& frame, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_frame_csv: cannot open " + path);
    out << "timestamp," << kChannelNames[0] << "," << kChannelNames[1] << ","
        << kChannelNames[2] << "\n";
    for (std::size_t i = 0; i < frame.size(); ++i) {
        if (!frame.valid[i]) continue;
        out << time_util::format_timestamp(frame.timestamps[i]);
        for (std::size_t c = 0; c < kNumChannels; ++c) {
            out << "," << full_precision(frame.channels[c][i]);
        }
        out << "\n";
    }
    if (!out) throw IoError("write_frame_csv: write failed for " + path);
}

}  // namespace ieq
