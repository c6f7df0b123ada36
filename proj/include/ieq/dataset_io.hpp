#ifndef IEQ_DATASET_IO_HPP
#define IEQ_DATASET_IO_HPP

#include <string>

#include "ieq/pipeline.hpp"
#include "ieq/timeseries.hpp"

namespace ieq {

// Windowed dataset file: magic "IEQW1", then samples/window/features/targets
// as little-endian 64-bit unsigned integers, then row-major little-endian
// 64-bit floats: inputs, targets, sample timestamps.
void write_dataset(const WindowedDataset& ds, const std::string& path);
WindowedDataset read_dataset(const std::string& path);

// Scaler sidecar: structured text with per-feature min/max at full
// precision plus the degenerate flag.
void write_scaler(const Scaler& scaler, const std::string& path);
Scaler read_scaler(const std::string& path);

/// Write a frame as the CSV ingest_csv reads (header + one row per valid
/// point, ISO-8601 timestamps, full-precision values). Invalid points are
/// omitted; regularize() reconstructs them as explicit gaps.
void write_frame_csv(const TimeSeriesFrame& frame, const std::string& path);

}  // namespace ieq

#endif  // IEQ_DATASET_IO_HPP
