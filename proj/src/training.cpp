#include "ieq/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>

#include "ieq/errors.hpp"
#include "ieq/kernels.hpp"
#include "ieq/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ieq {

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (max_epochs == 0) throw ConfigError("TrainConfig: max_epochs must be >= 1");
    if (!(lr_factor > 0.0 && lr_factor < 1.0)) {
        throw ConfigError("TrainConfig: lr_factor must be in (0, 1)");
    }
    if (min_lr > initial_lr) throw ConfigError("TrainConfig: min_lr must be <= initial_lr");
    if (lr_patience < 1 || early_stop_patience < 1) {
        throw ConfigError("TrainConfig: patiences must be >= 1");
    }
}

MaeLossResult mae_loss(const Matrix& predictions, const Matrix& targets) {
    if (!predictions.same_shape(targets)) {
        throw std::invalid_argument("mae_loss: prediction/target shape mismatch");
    }
    MaeLossResult out;
    out.gradient = Matrix(predictions.rows(), predictions.cols());
    const std::size_t n = predictions.size();
    const double scale = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = predictions.data()[i] - targets.data()[i];
        total += std::abs(e);
        out.gradient.data()[i] = e > 0.0 ? scale : (e < 0.0 ? -scale : 0.0);
    }
    out.loss = total * scale;
    return out;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("adam_step: params/grads size mismatch");
    }
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.step_count = 0;
    }
    if (state.m.size() != params.size()) {
        throw std::invalid_argument("adam_step: state size mismatch");
    }
    for (double g : grads) {
        if (!std::isfinite(g)) {
            throw TrainingAbort("adam_step: non-finite gradient", -1, -1, lr);
        }
    }
    ++state.step_count;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

double plateau_scheduler(const TrainHistory& history, const TrainConfig& config) {
    double lr = config.initial_lr;
    double best = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    for (const EpochStats& e : history) {
        if (e.val_mae < best) {
            best = e.val_mae;
            stale = 0;
        } else if (++stale == config.lr_patience) {
            lr = std::max(lr * config.lr_factor, config.min_lr);
            stale = 0;
        }
    }
    return lr;
}

bool early_stopper(const TrainHistory& history, std::size_t patience) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    for (const EpochStats& e : history) {
        if (e.val_mae < best) {
            best = e.val_mae;
            stale = 0;
        } else {
            ++stale;
        }
    }
    return stale >= patience;
}

std::size_t best_epoch_index(const TrainHistory& history) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (history[i].val_mae < history[best].val_mae) best = i;
    }
    return best;
}

Matrix sample_window(const WindowedDataset& ds, std::size_t i) {
    Matrix window(ds.window, ds.features);
    const auto src = ds.input(i);
    std::copy(src.begin(), src.end(), window.data().begin());
    return window;
}

namespace {

struct ValScore {
    double mae;
    double rmse;
};

// Validation pass. Per-sample errors land in a preallocated slot, then are
// reduced in sample order so the result is independent of thread count.
ValScore score_dataset(const ModelParams& params, const WindowedDataset& ds) {
    const std::size_t n = ds.samples();
    std::vector<double> abs_err(n), sq_err(n);
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
            const auto target = ds.target(i);
            double a = 0.0, s = 0.0;
            for (std::size_t c = 0; c < kNumTargets; ++c) {
                const double e = pred[c] - target[c];
                a += std::abs(e);
                s += e * e;
            }
            abs_err[i] = a;
            sq_err[i] = s;
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (!thrown) thrown = std::current_exception();
        }
    }
    if (thrown) std::rethrow_exception(thrown);
    double total_abs = 0.0, total_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total_abs += abs_err[i];
        total_sq += sq_err[i];
    }
    const double denom = static_cast<double>(n * kNumTargets);
    return {total_abs / denom, std::sqrt(total_sq / denom)};
}

}  // namespace

FitResult fit(const ModelSpec& spec, const WindowedDataset& train,
              const WindowedDataset& validation, const TrainConfig& config) {
    config.validate();
    if (train.samples() == 0 || validation.samples() == 0) {
        throw std::invalid_argument("fit: train and validation sets must be nonempty");
    }
    if (train.features != spec.input_features) {
        throw std::invalid_argument("fit: dataset features do not match spec");
    }

    ModelParams params = init_params(spec);
    AdamState adam;
    adam.beta1 = config.adam_beta1;
    adam.beta2 = config.adam_beta2;
    adam.eps = config.adam_eps;

    CounterRng shuffle_rng(config.shuffle_seed);
    std::vector<std::size_t> order(train.samples());
    std::iota(order.begin(), order.end(), 0);

    const std::size_t param_count = params.size();
    std::vector<double> batch_grad(param_count);
    std::vector<std::vector<double>> sample_grads;  // allocated when parallel
    std::vector<ForwardCache> caches(config.batch_size);
    Matrix batch_pred(config.batch_size, kNumTargets);
    Matrix batch_target(config.batch_size, kNumTargets);

    FitResult result{ModelParams(spec), {}, 0, false};
    double best_val = std::numeric_limits<double>::infinity();
    double lr = config.initial_lr;
    const int threads = max_threads();

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();

        // Fisher-Yates with the continuing seeded stream.
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = shuffle_rng.uniform_int(i);
            std::swap(order[i - 1], order[j]);
        }

        double epoch_abs_sum = 0.0;
        const std::size_t n_train = train.samples();
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < n_train; begin += config.batch_size, ++batch_index) {
            const std::size_t bsz = std::min(config.batch_size, n_train - begin);

            if (threads > 1 && sample_grads.empty()) {
                sample_grads.assign(config.batch_size, std::vector<double>(param_count));
            }
            std::exception_ptr thrown;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
#endif
            for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(bsz); ++b) {
                try {
                    const std::size_t sample = order[begin + b];
                    const Matrix window = sample_window(train, sample);
                    const auto pred = model_forward(params, window, &caches[b]);
                    for (std::size_t c = 0; c < kNumTargets; ++c) {
                        batch_pred(b, c) = pred[c];
                        batch_target(b, c) = train.target(sample)[c];
                    }
                } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
                    if (!thrown) thrown = std::current_exception();
                }
            }
            if (thrown) std::rethrow_exception(thrown);

            // Loss over the batch (short final batches keep their true size).
            double batch_abs = 0.0;
            const double scale = 1.0 / static_cast<double>(bsz * kNumTargets);
            Matrix upstream(bsz, kNumTargets);
            for (std::size_t b = 0; b < bsz; ++b) {
                for (std::size_t c = 0; c < kNumTargets; ++c) {
                    const double e = batch_pred(b, c) - batch_target(b, c);
                    batch_abs += std::abs(e);
                    upstream(b, c) = e > 0.0 ? scale : (e < 0.0 ? -scale : 0.0);
                }
            }
            epoch_abs_sum += batch_abs;
            if (!std::isfinite(batch_abs)) {
                throw TrainingAbort("fit: non-finite loss (epoch " + std::to_string(epoch) +
                                        ", batch " + std::to_string(batch_index) + ", lr " +
                                        std::to_string(lr) + ")",
                                    static_cast<int>(epoch), static_cast<int>(batch_index), lr);
            }

            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            if (threads > 1) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads)
#endif
                for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(bsz); ++b) {
                    try {
                        std::fill(sample_grads[b].begin(), sample_grads[b].end(), 0.0);
                        model_backward(params, caches[b], upstream.row(b), sample_grads[b]);
                    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
                        if (!thrown) thrown = std::current_exception();
                    }
                }
                if (thrown) std::rethrow_exception(thrown);
                // Fixed-order reduction keeps the sum identical to the
                // serial path at any thread count.
                for (std::size_t b = 0; b < bsz; ++b) {
                    for (std::size_t i = 0; i < param_count; ++i) {
                        batch_grad[i] += sample_grads[b][i];
                    }
                }
            } else {
                std::vector<double> sample_grad(param_count);
                for (std::size_t b = 0; b < bsz; ++b) {
                    std::fill(sample_grad.begin(), sample_grad.end(), 0.0);
                    model_backward(params, caches[b], upstream.row(b), sample_grad);
                    for (std::size_t i = 0; i < param_count; ++i) {
                        batch_grad[i] += sample_grad[i];
                    }
                }
            }

            try {
                adam_step(params.flat(), batch_grad, adam, lr);
            } catch (const TrainingAbort& abort) {
                throw TrainingAbort(std::string(abort.what()) + " (epoch " +
                                        std::to_string(epoch) + ", batch " +
                                        std::to_string(batch_index) + ")",
                                    static_cast<int>(epoch), static_cast<int>(batch_index), lr);
            }
        }

        const ValScore val = score_dataset(params, validation);
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start)
                .count();

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_mae = epoch_abs_sum / static_cast<double>(n_train * kNumTargets);
        stats.val_mae = val.mae;
        stats.val_rmse = val.rmse;
        stats.lr = lr;
        stats.seconds = seconds;
        result.history.push_back(stats);

        if (val.mae < best_val) {
            best_val = val.mae;
            result.params = params;
            result.best_epoch = epoch;
        }

        if (early_stopper(result.history, config.early_stop_patience)) {
            result.early_stopped = true;
            break;
        }
        lr = plateau_scheduler(result.history, config);
    }
    return result;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_history_csv: cannot open " + path);
    out << "epoch,train_mae,val_mae,val_rmse,lr,seconds\n";
    char buf[192];
    for (const EpochStats& e : history) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.6f\n", e.epoch,
                      e.train_mae, e.val_mae, e.val_rmse, e.lr, e.seconds);
        out << buf;
    }
    if (!out) throw IoError("write_history_csv: write failed for " + path);
}

}  // namespace ieq
