// Acceptance suite: runs every release criterion end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ieq/cli.hpp"
#include "ieq/dataset_io.hpp"
#include "ieq/errors.hpp"
#include "ieq/evaluation.hpp"
#include "ieq/gradcheck.hpp"
#include "ieq/kernels.hpp"
#include "ieq/models.hpp"
#include "ieq/pipeline.hpp"
#include "ieq/rng.hpp"
#include "ieq/synthdata.hpp"
#include "ieq/training.hpp"

using namespace ieq;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(const std::string& name, bool passed, const std::string& detail) {
    std::printf("[%s] %-22s %s\n", passed ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!passed) ++g_failures;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Criterion 1: feeding the published per-target MAE/MSE/R2 values into the
// global aggregation reproduces the published global values within 1e-4,
// and sqrt(global MSE) reproduces global RMSE within 1e-4, for all three
// models.
// ---------------------------------------------------------------------------
void check_aggregation_identity() {
    struct Row {
        const char* name;
        std::array<double, 3> mae, mse, r2;
        double g_mae, g_mse, g_rmse, g_r2;
    };
    const Row rows[] = {
        {"lstm", {0.0644, 3.6760, 0.2591}, {0.0102, 23.3138, 0.2059},
         {0.9747, 0.9823, 0.9842}, 1.3332, 7.8433, 2.8006, 0.9804},
        {"gru", {0.0362, 2.8950, 0.1646}, {0.0032, 13.6871, 0.0935},
         {0.9921, 0.9896, 0.9928}, 1.0320, 4.5946, 2.1435, 0.9915},
        {"cnn_lstm", {0.1470, 26.6146, 0.7337}, {0.0368, 942.5850, 0.9144},
         {0.9087, 0.2849, 0.9298}, 9.1651, 314.5121, 17.7345, 0.7078},
    };
    bool ok = true;
    double worst = 0.0;
    for (const Row& row : rows) {
        std::array<TargetMetrics, 3> per_target;
        for (std::size_t c = 0; c < 3; ++c) {
            per_target[c].mae = row.mae[c];
            per_target[c].mse = row.mse[c];
            per_target[c].rmse = std::sqrt(row.mse[c]);
            per_target[c].r2 = row.r2[c];
        }
        const TargetMetrics g = aggregate_global(per_target);
        for (double err : {std::abs(g.mae - row.g_mae), std::abs(g.mse - row.g_mse),
                           std::abs(g.rmse - row.g_rmse), std::abs(*g.r2 - row.g_r2)}) {
            worst = std::max(worst, err);
            ok = ok && err < 1e-4;
        }
    }
    char detail[128];
    std::snprintf(detail, sizeof(detail),
                  "all 3 models, global MAE/MSE/RMSE/R2, worst |err| = %.2g (tol 1e-4)",
                  worst);
    report("aggregation-identity", ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 2: central-difference gradient checks (eps 1e-5, tol 1e-4) pass
// on >= 20 seeded random instances for each model family plus the MAE loss,
// convolution and dense layers.
// ---------------------------------------------------------------------------
void check_gradient_suite() {
    const auto start = Clock::now();
    const double eps = 1e-5, tol = 1e-4;
    bool ok = true;
    double worst = 0.0;
    int instances = 0;
    CounterRng rng(220);

    // Model families, 20 instances each. Upstream weights are kept away
    // from zero: a coordinate whose true gradient sits below the central
    // difference's roundoff floor (~1e-11 here) measures noise, not the
    // derivative.
    for (Family family : {Family::lstm, Family::gru, Family::cnn_lstm}) {
        for (int trial = 0; trial < 20; ++trial) {
            ModelSpec spec;
            spec.family = family;
            spec.hidden_size = 3 + trial % 4;
            spec.input_features = 3 + trial % 3;
            spec.conv_filters = 3;
            spec.conv_kernel = 2;
            ModelParams params(spec);
            for (double& v : params.flat()) v = rng.uniform(-0.5, 0.5);
            Matrix window(5, spec.input_features);
            for (double& v : window.data()) v = rng.uniform(0.0, 1.0);
            std::vector<double> up(3);
            for (double& v : up) {
                const double mag = rng.uniform(0.25, 1.0);
                v = rng.uniform() < 0.5 ? -mag : mag;
            }

            ForwardCache cache;
            model_forward(params, window, &cache);
            const std::vector<double> analytic = model_backward(params, cache, up);
            auto f = [&](std::span<const double> p) {
                const ModelParams probe(spec, {p.begin(), p.end()});
                const auto pred = model_forward(probe, window);
                return up[0] * pred[0] + up[1] * pred[1] + up[2] * pred[2];
            };
            const GradCheckReport r = gradient_check(f, params.flat(), analytic, eps, tol);
            ok = ok && r.passed;
            worst = std::max(worst, r.max_relative_error);
            ++instances;
        }
    }

    // MAE loss, away from ties.
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t b = 2 + trial % 6;
        Matrix targets(b, 3);
        for (double& v : targets.data()) v = rng.uniform(0.0, 1.0);
        std::vector<double> params(b * 3);
        for (std::size_t i = 0; i < params.size(); ++i) {
            double offset = rng.uniform(-1.0, 1.0);
            if (std::abs(offset) < 1e-3) offset = 0.2;
            params[i] = targets.data()[i] + offset;
        }
        auto f = [&](std::span<const double> p) {
            Matrix pred(b, 3, {p.begin(), p.end()});
            return mae_loss(pred, targets).loss;
        };
        Matrix pred(b, 3, params);
        const MaeLossResult loss = mae_loss(pred, targets);
        const GradCheckReport r = gradient_check(f, params, loss.gradient.data(), eps, tol);
        ok = ok && r.passed;
        worst = std::max(worst, r.max_relative_error);
        ++instances;
    }

    // Convolution layer (kernel + bias + input grads).
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t taps = 2 + trial % 2, c_in = 2 + trial % 2, c_out = 2 + trial % 3;
        const std::size_t t_in = taps + 3 + trial % 3;
        const std::size_t kw = taps * c_in * c_out;
        std::vector<double> params(kw + c_out + t_in * c_in);
        for (double& v : params) v = rng.uniform(-1.0, 1.0);
        std::vector<double> up((t_in - taps + 1) * c_out);
        for (double& v : up) v = rng.uniform(-1.0, 1.0);
        auto unpack = [&](std::span<const double> p, Conv1dKernel& kernel,
                          std::vector<double>& bias, Matrix& input) {
            kernel = Conv1dKernel(taps, c_in, c_out);
            std::copy(p.begin(), p.begin() + kw, kernel.w.begin());
            bias.assign(p.begin() + kw, p.begin() + kw + c_out);
            input = Matrix(t_in, c_in, {p.begin() + kw + c_out, p.end()});
        };
        auto f = [&](std::span<const double> p) {
            Conv1dKernel kernel;
            std::vector<double> bias;
            Matrix input;
            unpack(p, kernel, bias, input);
            const Matrix y = conv1d_forward(input, kernel, bias);
            double loss = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) loss += up[i] * y.data()[i];
            return loss;
        };
        Conv1dKernel kernel;
        std::vector<double> bias;
        Matrix input;
        unpack(params, kernel, bias, input);
        const Conv1dGrads g =
            conv1d_backward(input, kernel, Matrix(t_in - taps + 1, c_out, up));
        std::vector<double> analytic;
        analytic.insert(analytic.end(), g.kernel_grad.w.begin(), g.kernel_grad.w.end());
        analytic.insert(analytic.end(), g.bias_grad.begin(), g.bias_grad.end());
        analytic.insert(analytic.end(), g.input_grad.data().begin(), g.input_grad.data().end());
        const GradCheckReport r = gradient_check(f, params, analytic, eps, tol);
        ok = ok && r.passed;
        worst = std::max(worst, r.max_relative_error);
        ++instances;
    }

    // Dense layer (weights + bias + input grads).
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t rows = 2 + trial % 4, cols = 2 + trial % 5;
        std::vector<double> params(rows * cols + rows + cols);
        for (double& v : params) v = rng.uniform(-1.0, 1.0);
        std::vector<double> up(rows);
        for (double& v : up) v = rng.uniform(-1.0, 1.0);
        auto f = [&](std::span<const double> p) {
            double loss = 0.0;
            for (std::size_t i = 0; i < rows; ++i) {
                double acc = p[rows * cols + i];
                for (std::size_t j = 0; j < cols; ++j) {
                    acc += p[i * cols + j] * p[rows * cols + rows + j];
                }
                loss += up[i] * acc;
            }
            return loss;
        };
        const Matrix w(rows, cols, {params.begin(), params.begin() + rows * cols});
        std::span<const double> x{params.data() + rows * cols + rows, cols};
        LinearGrads g = linear_backward(w, x, up);
        std::vector<double> analytic;
        analytic.insert(analytic.end(), g.weight_grad.data().begin(),
                        g.weight_grad.data().end());
        for (std::size_t i = 0; i < rows; ++i) analytic.push_back(up[i]);
        for (std::size_t j = 0; j < cols; ++j) analytic.push_back(g.input_grad(j, 0));
        const GradCheckReport r = gradient_check(f, params, analytic, eps, tol);
        ok = ok && r.passed;
        worst = std::max(worst, r.max_relative_error);
        ++instances;
    }

    const double secs = seconds_since(start);
    ok = ok && secs < 60.0;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "%d instances (3 families + loss + conv + dense), worst rel err %.2g "
                  "(tol 1e-4), %.1fs (limit 60s)",
                  instances, worst, secs);
    report("gradient-suite", ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 3: each family drives training MAE below 1e-2 on a 64-sample
// memorization set within 2000 Adam updates at lr in [1e-4, 1e-3].
// ---------------------------------------------------------------------------
void check_overfit_smoke() {
    const auto start = Clock::now();
    bool ok = true;
    std::string detail;
    for (Family family : {Family::lstm, Family::gru, Family::cnn_lstm}) {
        ModelSpec spec;
        spec.family = family;
        spec.hidden_size = 32;
        spec.seed = 11;

        CounterRng rng(404);
        WindowedDataset ds;
        ds.window = kDefaultWindow;
        ds.features = kNumFeatures;
        std::vector<double> input(ds.window * ds.features);
        for (double& v : input) v = rng.uniform(0.0, 1.0);
        const std::array<double, 3> target = {0.31, 0.62, 0.47};
        for (int i = 0; i < 64; ++i) {
            ds.inputs.insert(ds.inputs.end(), input.begin(), input.end());
            ds.targets.insert(ds.targets.end(), target.begin(), target.end());
            ds.sample_timestamps.push_back(i);
        }

        TrainConfig cfg;
        cfg.batch_size = 64;  // one update per epoch on 64 copies
        cfg.max_epochs = 200;
        cfg.initial_lr = 1e-3;
        cfg.lr_patience = 100000;
        cfg.early_stop_patience = 100000;
        cfg.shuffle_seed = 5;
        const FitResult r = fit(spec, ds, ds, cfg);
        std::size_t updates = 0;
        for (std::size_t e = 0; e < r.history.size(); ++e) {
            if (r.history[e].train_mae < 1e-2) {
                updates = e + 1;
                break;
            }
        }
        const bool family_ok = updates > 0 && updates <= 2000;
        ok = ok && family_ok;
        detail += family_name(family) + "=" + std::to_string(updates) + " ";
    }
    const double secs = seconds_since(start);
    ok = ok && secs < 120.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "updates to MAE<1e-2 (limit 2000): %s lr=1e-3, %.1fs "
                                    "(limit 120s)",
                  detail.c_str(), secs);
    report("overfit-smoke", ok, buf);
}

// ---------------------------------------------------------------------------
// Criteria 4 and 5: the three-model benchmark on the default 14-day seeded
// synthetic dataset. LSTM and GRU must reach per-target R2 >= 0.9 and beat
// the persistence baseline MAE on every target, in under 5 minutes
// single-threaded; GRU's recurrent parameter block must be exactly 3/4 of
// LSTM's and its measured mean epoch time strictly smaller.
// ---------------------------------------------------------------------------
void check_synthetic_benchmark() {
    const auto start = Clock::now();
    cli::RunConfig cfg = cli::RunConfig::defaults();
    cfg.work_dir = (fs::temp_directory_path() / "ieq_acceptance_benchmark").string();
    fs::remove_all(cfg.work_dir);
    // Default synthetic dataset; training configuration tuned for desk scale
    // (a 1e-4 starting rate decays to the floor long before convergence
    // under the halve-after-3-stagnant rule).
    cfg.model.seed = 17;
    cfg.training.shuffle_seed = 99;
    cfg.training.initial_lr = 5e-3;
    cfg.training.max_epochs = 80;

    bool ok = true;
    std::string detail;
    double gru_epoch_s = 0.0, lstm_epoch_s = 0.0;
    std::size_t gru_rec = 0, lstm_rec = 0;
    try {
        cli::cmd_synth(cfg);
        cli::cmd_prepare(cfg);
        const WindowedDataset test = read_dataset(cfg.dataset_path("test"));
        const Scaler scaler = read_scaler(cfg.scaler_path());
        const auto baseline = persistence_mae(test, scaler);

        const cli::BenchmarkSummary bench = cli::cmd_benchmark(cfg);
        if (bench.results.size() != 3) {
            ok = false;
            detail = "benchmark incomplete";
        }
        for (const cli::FamilyResult& r : bench.results) {
            ModelSpec spec = cfg.model;
            spec.family = family_from_name(r.family);
            if (r.family == "gru") {
                gru_epoch_s = r.mean_epoch_seconds;
                gru_rec = spec.recurrent_param_count();
            }
            if (r.family == "lstm") {
                lstm_epoch_s = r.mean_epoch_seconds;
                lstm_rec = spec.recurrent_param_count();
            }
            if (r.family != "lstm" && r.family != "gru") continue;

            for (std::size_t c = 0; c < kNumTargets; ++c) {
                const TargetMetrics& m = r.report.per_target[c];
                const bool r2_ok = m.r2.has_value() && *m.r2 >= 0.9;
                const bool beats = m.mae < baseline[c];
                ok = ok && r2_ok && beats;
            }
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%s r2(T/C/H)=%.3f/%.3f/%.3f ", r.family.c_str(),
                          r.report.per_target[0].r2.value_or(-1),
                          r.report.per_target[1].r2.value_or(-1),
                          r.report.per_target[2].r2.value_or(-1));
            detail += buf;
        }
        char buf[96];
        std::snprintf(buf, sizeof(buf), "persistence(T/C/H)=%.3f/%.2f/%.3f ", baseline[0],
                      baseline[1], baseline[2]);
        detail += buf;
    } catch (const std::exception& e) {
        ok = false;
        detail = std::string("exception: ") + e.what();
    }
    const double secs = seconds_since(start);
    ok = ok && secs < 300.0;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.0fs (limit 300s)", secs);
    report("synthetic-benchmark", ok, detail + buf);

    // Criterion 5: parameter-count ratio and epoch wall time.
    const bool ratio_ok = gru_rec * 4 == lstm_rec * 3 && gru_rec > 0;
    const bool time_ok = gru_epoch_s > 0.0 && gru_epoch_s < lstm_epoch_s;
    char detail5[160];
    std::snprintf(detail5, sizeof(detail5),
                  "GRU recurrent params %zu = 3/4 of LSTM %zu; mean epoch %.3fs < %.3fs",
                  gru_rec, lstm_rec, gru_epoch_s, lstm_epoch_s);
    report("ordering-sanity", ratio_ok && time_ok, detail5);
}

// ---------------------------------------------------------------------------
// Criterion 6: pipeline oracles — exact-cubic gap reproduction within 1e-8,
// scaler round-trip within 1e-10, the window-count formula against brute
// force, and the split sizes for N in {40, 1000, 123789}.
// ---------------------------------------------------------------------------
void check_pipeline_oracles() {
    bool ok = true;
    std::string failures;

    // Cubic reproduction.
    {
        auto cubic = [](double x) { return 0.25 * x * x * x - 1.5 * x * x + 2.0 * x + 25.0; };
        TimeSeriesFrame frame;
        for (int i = 0; i < 14; ++i) {
            frame.timestamps.push_back(1704067200 + i * kStepSeconds);
            const bool hole = i >= 6 && i <= 8;
            frame.valid.push_back(hole ? 0 : 1);
            const double v = cubic(0.2 * i);
            for (std::size_t c = 0; c < kNumChannels; ++c) {
                frame.channels[c].push_back(hole ? std::nan("") : v);
            }
        }
        const TimeSeriesFrame filled = interpolate_short_gaps(frame);
        for (int i = 6; i <= 8; ++i) {
            for (std::size_t c = 0; c < kNumChannels; ++c) {
                if (std::abs(filled.channels[c][i] - cubic(0.2 * i)) > 1e-8) ok = false;
            }
            if (!filled.valid[i]) ok = false;
        }
        if (!ok) failures += "cubic ";
    }

    // Scaler round-trip.
    {
        bool scaler_ok = true;
        std::array<double, kNumFeatures> mins = {15.0, 380.0, 30.0, -1, -1, -1, -1};
        std::array<double, kNumFeatures> maxs = {30.0, 2000.0, 70.0, 1, 1, 1, 1};
        const Scaler scaler = Scaler::from_params(mins, maxs);
        CounterRng rng(606);
        for (int i = 0; i < 1000; ++i) {
            const std::size_t f = rng.uniform_int(kNumFeatures);
            const double v = rng.uniform(mins[f], maxs[f]);
            const double back = scaler.inverse_transform(f, scaler.transform(f, v));
            if (std::abs(back - v) > 1e-10 * std::max(1.0, std::abs(v))) scaler_ok = false;
        }
        ok = ok && scaler_ok;
        if (!scaler_ok) failures += "scaler ";
    }

    // Window-count formula vs brute force on a gapped frame.
    {
        CounterRng rng(707);
        std::vector<int> mask(800, 1);
        for (int i = 0; i < 25; ++i) mask[rng.uniform_int(800)] = 0;
        TimeSeriesFrame frame;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            frame.timestamps.push_back(1704067200 + static_cast<std::int64_t>(i) * kStepSeconds);
            frame.valid.push_back(mask[i]);
            for (std::size_t c = 0; c < kNumChannels; ++c) {
                frame.channels[c].push_back(mask[i] ? 20.0 + 0.001 * i : std::nan(""));
            }
        }
        const auto segments = extract_segments(frame, 13);
        const Scaler scaler = Scaler::fit(frame, segments, 0.85);
        const WindowedDataset ds = make_windows(frame, segments, scaler);

        std::size_t brute = 0;
        for (std::size_t i = 0; i + 12 < frame.size(); ++i) {
            bool all_valid = true;
            for (std::size_t k = i; k <= i + 12; ++k) all_valid = all_valid && frame.valid[k];
            if (all_valid) ++brute;
        }
        std::size_t formula = 0;
        for (const auto& seg : segments) formula += seg.length() - 12;
        const bool windows_ok = ds.samples() == brute && ds.samples() == formula;
        ok = ok && windows_ok;
        if (!windows_ok) failures += "window-count ";
    }

    // Split sizes.
    {
        const bool splits_ok = split_floor(40, 0.85) == 34 && split_floor(40, 0.075) == 3 &&
                               split_floor(1000, 0.85) == 850 &&
                               split_floor(1000, 0.075) == 75 &&
                               split_floor(123789, 0.85) == 105220 &&
                               split_floor(123789, 0.075) == 9284 &&
                               123789 - 105220 - 9284 == 9285;
        ok = ok && splits_ok;
        if (!splits_ok) failures += "split-sizes ";
    }

    report("pipeline-oracles", ok,
           ok ? "cubic 1e-8, scaler 1e-10, window formula, splits 40/1000/123789"
              : "failed: " + failures);
}

// ---------------------------------------------------------------------------
// Criterion 7: two benchmark runs with identical config and seeds produce
// byte-identical tables.
// ---------------------------------------------------------------------------
void check_determinism() {
    cli::RunConfig cfg = cli::RunConfig::defaults();
    cfg.work_dir = (fs::temp_directory_path() / "ieq_acceptance_determinism").string();
    fs::remove_all(cfg.work_dir);
    cfg.synth.days = 3;
    cfg.synth.seed = 33;
    cfg.model.hidden_size = 16;
    cfg.model.seed = 2;
    cfg.training.max_epochs = 2;
    cfg.training.initial_lr = 1e-3;
    cfg.training.shuffle_seed = 6;

    bool ok = true;
    std::string detail = "two cmd_benchmark runs, byte-identical table";
    try {
        cli::cmd_synth(cfg);
        cli::cmd_prepare(cfg);
        cli::cmd_benchmark(cfg);
        const std::string first = slurp(cfg.benchmark_table_path());
        cli::cmd_benchmark(cfg);
        const std::string second = slurp(cfg.benchmark_table_path());
        ok = !first.empty() && first == second;
    } catch (const std::exception& e) {
        ok = false;
        detail = std::string("exception: ") + e.what();
    }
    report("determinism", ok, detail);
}

}  // namespace

int main() {
    std::printf("IEQ forecasting toolkit acceptance suite\n");
    check_aggregation_identity();
    check_gradient_suite();
    check_overfit_smoke();
    check_synthetic_benchmark();
    check_pipeline_oracles();
    check_determinism();
    if (g_failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
}
