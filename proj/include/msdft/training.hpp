#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "msdft/checkpoint.hpp"
#include "msdft/data.hpp"
#include "msdft/model.hpp"

namespace msdft::training {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::size_t step = 0;
    double lr = 1e-4;
    std::size_t stagnation = 0;
    double best_loss = std::numeric_limits<double>::infinity();
};

OptimizerState make_optimizer(const ParameterStore& params, double lr);

/// One bias-corrected Adam update from the gradients stored on `params`.
/// Throws NumericError naming the parameter before touching anything if a
/// gradient is not finite.
void adam_step(ParameterStore& params, OptimizerState& opt, const AdamConfig& cfg = {});

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(ParameterStore& params, double max_norm);

struct ScheduleConfig {
    std::size_t patience = 3;
    double factor = 0.5;
    double min_lr = 1e-6;
    double threshold = 1e-6;  // minimum improvement that resets stagnation
};

/// Halves (by `factor`) the learning rate after `patience` consecutive epochs
/// without an improvement of at least `threshold` over the best loss.
void lr_schedule(OptimizerState& opt, double val_loss, const ScheduleConfig& cfg = {});

struct EvalReport {
    double mse = 0.0;
    double mae = 0.0;
    std::vector<double> step_mse;  // one entry per horizon step
    std::size_t windows = 0;
};

/// Micro-averaged metrics over predictions/targets laid out as
/// [windows, horizon, channels].
EvalReport compute_metrics(std::span<const double> pred, std::span<const double> target, std::size_t horizon,
                           std::size_t channels);

EvalReport evaluate(const ModelState& state, const std::vector<data::Window>& windows, std::size_t batch_size = 64);

/// Naive forecaster repeating the last observed row across the horizon.
EvalReport evaluate_persistence(const std::vector<data::Window>& windows);

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double lr = 1e-4;
    std::uint64_t seed = 42;
    double clip_norm = 5.0;  // <= 0 disables clipping
    AdamConfig adam;
    ScheduleConfig schedule;
    std::ostream* progress = nullptr;  // epoch lines are echoed here when set
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    ModelState final_state;
    ModelState best_state;  // lowest validation loss seen
    std::size_t best_epoch = 0;
    std::vector<EpochRecord> log;
    bool diverged = false;
    std::string message;
};

/// `ds` must already be split and normalised. The model config's lookback and
/// horizon must match `windows`.
TrainResult train(const ModelConfig& config, const data::Dataset& ds, const data::WindowSpec& windows,
                  const TrainConfig& cfg);

/// CSV "epoch,train_mse,val_mse,lr" with 17 significant digits.
std::string format_log_csv(const std::vector<EpochRecord>& log);

}  // namespace msdft::training
