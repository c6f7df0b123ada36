#ifndef IEQ_TRAINING_HPP
#define IEQ_TRAINING_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ieq/matrix.hpp"
#include "ieq/models.hpp"
#include "ieq/pipeline.hpp"

namespace ieq {

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t max_epochs = 100;
    double initial_lr = 1e-4;
    double lr_factor = 0.5;
    std::size_t lr_patience = 3;
    double min_lr = 1e-6;
    std::size_t early_stop_patience = 7;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t shuffle_seed = 0;

    /// Throws ConfigError when an invariant is violated.
    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double train_mae = 0.0;
    double val_mae = 0.0;
    double val_rmse = 0.0;
    double lr = 0.0;      // rate in effect during this epoch
    double seconds = 0.0;  // wall time of the epoch
};

using TrainHistory = std::vector<EpochStats>;

struct MaeLossResult {
    double loss = 0.0;
    Matrix gradient;  // dloss/dprediction, same shape as predictions
};

/**
 * Mean absolute error over all B*3 entries. Gradient entries are
 * sign(p - t) / (B*3) with sign(0) = 0. Throws std::invalid_argument on a
 * shape mismatch.
 */
MaeLossResult mae_loss(const Matrix& predictions, const Matrix& targets);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m;  // sized on first step
    std::vector<double> v;
    std::size_t step_count = 0;
};

/**
 * One Adam update with bias correction, in place. Throws TrainingAbort when
 * the gradient contains a non-finite value.
 */
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr);

/**
 * Learning rate for the next epoch: walk the history tracking the best
 * validation MAE (any strict decrease counts); after `lr_patience`
 * consecutive non-improving epochs halve the rate (never below min_lr) and
 * reset the stagnation counter.
 */
double plateau_scheduler(const TrainHistory& history, const TrainConfig& config);

/// True when the last `patience` epochs all failed to improve on the best
/// validation MAE seen before them.
bool early_stopper(const TrainHistory& history, std::size_t patience);

/// Index into `history` of the epoch with the lowest validation MAE
/// (earliest on ties).
std::size_t best_epoch_index(const TrainHistory& history);

struct FitResult {
    ModelParams params;       // best-validation weights
    TrainHistory history;
    std::size_t best_epoch = 0;  // 1-based
    bool early_stopped = false;
};

/**
 * Mini-batch training loop: per epoch, shuffle with the seeded generator,
 * iterate batches (final short batch kept), forward -> MAE -> backward ->
 * Adam, then evaluate validation MAE/RMSE and apply the scheduler and
 * stopper. Deterministic given (spec.seed, config.shuffle_seed). Throws
 * TrainingAbort with epoch/batch/lr context on a non-finite loss.
 */
FitResult fit(const ModelSpec& spec, const WindowedDataset& train,
              const WindowedDataset& validation, const TrainConfig& config);

/// Per-epoch history CSV: epoch,train_mae,val_mae,val_rmse,lr,seconds.
void write_history_csv(const TrainHistory& history, const std::string& path);

/// Copy sample i of a dataset into a [window x features] matrix.
Matrix sample_window(const WindowedDataset& ds, std::size_t i);

}  // namespace ieq

#endif  // IEQ_TRAINING_HPP
