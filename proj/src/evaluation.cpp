#include "ieq/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>

#include "ieq/errors.hpp"
#include "ieq/kernels.hpp"
#include "ieq/time_util.hpp"
#include "ieq/training.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ieq {

namespace {

std::string format_value(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string format_metric(const std::optional<double>& v) {
    return v ? format_value(*v) : "undefined";
}

}  // namespace

std::array<TargetMetrics, kNumTargets> per_target_metrics(const Matrix& predictions,
                                                          const Matrix& targets,
                                                          const Scaler& scaler) {
    if (!predictions.same_shape(targets) || predictions.cols() != kNumTargets) {
        throw std::invalid_argument("per_target_metrics: shape mismatch");
    }
    const std::size_t n = predictions.rows();
    if (n == 0) throw std::invalid_argument("per_target_metrics: empty input");

    std::array<TargetMetrics, kNumTargets> out;
    for (std::size_t c = 0; c < kNumTargets; ++c) {
        double sum_abs = 0.0, sum_sq = 0.0, sum_t = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = scaler.inverse_transform(c, predictions(i, c));
            const double t = scaler.inverse_transform(c, targets(i, c));
            const double e = p - t;
            sum_abs += std::abs(e);
            sum_sq += e * e;
            sum_t += t;
        }
        const double mean_t = sum_t / static_cast<double>(n);
        double sst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = scaler.inverse_transform(c, targets(i, c));
            sst += (t - mean_t) * (t - mean_t);
        }
        TargetMetrics m;
        m.mae = sum_abs / static_cast<double>(n);
        m.mse = sum_sq / static_cast<double>(n);
        m.rmse = std::sqrt(m.mse);
        if (sst > 0.0) {
            m.r2 = 1.0 - sum_sq / sst;
        }
        out[c] = m;
    }
    return out;
}

TargetMetrics aggregate_global(const std::array<TargetMetrics, kNumTargets>& per_target) {
    TargetMetrics g;
    double r2_sum = 0.0;
    bool r2_defined = true;
    for (const TargetMetrics& m : per_target) {
        g.mae += m.mae;
        g.mse += m.mse;
        if (m.r2) {
            r2_sum += *m.r2;
        } else {
            r2_defined = false;
        }
    }
    g.mae /= static_cast<double>(kNumTargets);
    g.mse /= static_cast<double>(kNumTargets);
    g.rmse = std::sqrt(g.mse);
    if (r2_defined) g.r2 = r2_sum / static_cast<double>(kNumTargets);
    return g;
}

Matrix predict_all(const ModelParams& params, const WindowedDataset& ds) {
    if (ds.features != params.spec().input_features) {
        throw std::invalid_argument("predict_all: dataset has " + std::to_string(ds.features) +
                                    " features, model expects " +
                                    std::to_string(params.spec().input_features));
    }
    const std::size_t n = ds.samples();
    Matrix predictions(n, kNumTargets);
    const int threads = max_threads();
    // Exceptions may not cross an OpenMP region boundary; stash and rethrow.
    std::exception_ptr thrown;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
#endif
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            const Matrix window = sample_window(ds, i);
            const auto pred = model_forward(params, window);
            for (std::size_t c = 0; c < kNumTargets; ++c) predictions(i, c) = pred[c];
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (!thrown) thrown = std::current_exception();
        }
    }
    if (thrown) std::rethrow_exception(thrown);
    return predictions;
}

MetricsReport evaluate(const ModelParams& params, const WindowedDataset& test,
                       const Scaler& scaler) {
    const Matrix predictions = predict_all(params, test);
    Matrix targets(test.samples(), kNumTargets);
    std::copy(test.targets.begin(), test.targets.end(), targets.data().begin());

    MetricsReport report;
    report.per_target = per_target_metrics(predictions, targets, scaler);
    report.global = aggregate_global(report.per_target);
    report.sample_count = test.samples();
    report.model = family_name(params.spec().family);
    report.model_seed = params.spec().seed;
    return report;
}

void export_series(const ModelParams& params, const WindowedDataset& test,
                   const Scaler& scaler, const std::string& path) {
    const Matrix predictions = predict_all(params, test);
    std::ofstream out(path);
    if (!out) throw IoError("export_series: cannot open " + path);
    out << "timestamp";
    for (std::size_t c = 0; c < kNumTargets; ++c) {
        out << "," << kChannelNames[c] << "_true," << kChannelNames[c] << "_pred";
    }
    out << "\n";
    char buf[48];
    for (std::size_t i = 0; i < test.samples(); ++i) {
        out << time_util::format_timestamp(test.sample_timestamps[i]);
        for (std::size_t c = 0; c < kNumTargets; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", scaler.inverse_transform(c, test.target(i)[c]));
            out << "," << buf;
            std::snprintf(buf, sizeof(buf), "%.17g", scaler.inverse_transform(c, predictions(i, c)));
            out << "," << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("export_series: write failed for " + path);
}

void write_metrics_report(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_metrics_report: cannot open " + path);
    out << "IEQ metrics report\n";
    out << "model " << report.model << "\n";
    out << "model_seed " << report.model_seed << "\n";
    out << "shuffle_seed " << report.shuffle_seed << "\n";
    out << "samples " << report.sample_count << "\n";
    const std::array<const char*, 4> names = {"global", "air_temperature", "indoor_co2",
                                              "relative_humidity"};
    const std::array<const TargetMetrics*, 4> rows = {&report.global, &report.per_target[0],
                                                      &report.per_target[1],
                                                      &report.per_target[2]};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out << names[i] << " mae " << format_value(rows[i]->mae) << " mse "
            << format_value(rows[i]->mse) << " rmse " << format_value(rows[i]->rmse) << " r2 "
            << format_metric(rows[i]->r2) << "\n";
    }
    if (!out) throw IoError("write_metrics_report: write failed for " + path);
}

std::string metrics_table_csv(const std::vector<MetricsReport>& reports) {
    const std::array<const char*, 4> groups = {"global", "temperature", "co2", "humidity"};
    std::ostringstream out;
    out << "metric";
    for (const char* group : groups) {
        for (const MetricsReport& r : reports) out << "," << group << "_" << r.model;
    }
    out << "\n";

    auto pick = [](const MetricsReport& r, std::size_t group) -> const TargetMetrics& {
        return group == 0 ? r.global : r.per_target[group - 1];
    };
    const std::array<const char*, 4> metric_names = {"mae", "mse", "rmse", "r2"};
    for (std::size_t m = 0; m < metric_names.size(); ++m) {
        out << metric_names[m];
        for (std::size_t group = 0; group < groups.size(); ++group) {
            for (const MetricsReport& r : reports) {
                const TargetMetrics& t = pick(r, group);
                out << ",";
                switch (m) {
                    case 0: out << format_value(t.mae); break;
                    case 1: out << format_value(t.mse); break;
                    case 2: out << format_value(t.rmse); break;
                    case 3: out << format_metric(t.r2); break;
                }
            }
        }
        out << "\n";
    }
    return out.str();
}

void write_metrics_table(const std::vector<MetricsReport>& reports, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_metrics_table: cannot open " + path);
    out << metrics_table_csv(reports);
    if (!out) throw IoError("write_metrics_table: write failed for " + path);
}

std::array<double, kNumTargets> persistence_mae(const WindowedDataset& ds,
                                                const Scaler& scaler) {
    std::array<double, kNumTargets> sums{};
    const std::size_t last_step = ds.window - 1;
    for (std::size_t i = 0; i < ds.samples(); ++i) {
        const auto input = ds.input(i);
        const auto target = ds.target(i);
        for (std::size_t c = 0; c < kNumTargets; ++c) {
            const double last = scaler.inverse_transform(c, input[last_step * ds.features + c]);
            const double truth = scaler.inverse_transform(c, target[c]);
            sums[c] += std::abs(last - truth);
        }
    }
    for (double& s : sums) s /= static_cast<double>(ds.samples());
    return sums;
}

}  // namespace ieq
