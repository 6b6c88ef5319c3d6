#include "msdft/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "msdft/errors.hpp"

namespace msdft::training {

OptimizerState make_optimizer(const ParameterStore& params, double lr) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    OptimizerState opt;
    opt.lr = lr;
    for (const auto& e : params.entries()) {
        opt.m.emplace_back(e.value.numel(), 0.0);
        opt.v.emplace_back(e.value.numel(), 0.0);
    }
    return opt;
}

void adam_step(ParameterStore& params, OptimizerState& opt, const AdamConfig& cfg) {
    auto& entries = params.entries();
    if (opt.m.size() != entries.size()) throw ContractError("optimizer state does not match parameters");
    for (const auto& e : entries) {
        for (double g : e.value.grad()) {
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + e.name);
        }
    }
    ++opt.step;
    const double t = static_cast<double>(opt.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto& p = entries[i].value;
        auto& m = opt.m[i];
        auto& v = opt.v[i];
        if (m.size() != p.numel()) throw ContractError("moment shape mismatch for " + entries[i].name);
        auto w = p.mutable_data();
        auto g = p.grad();
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double gj = g.empty() ? 0.0 : g[j];
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            w[j] -= opt.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

double clip_grad_norm(ParameterStore& params, double max_norm) {
    double sq = 0.0;
    for (const auto& e : params.entries()) {
        for (double g : e.value.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double factor = max_norm / norm;
        for (auto& e : params.entries()) {
            if (!e.value.has_grad()) continue;
            for (double& g : e.value.mutable_grad()) g *= factor;
        }
    }
    return norm;
}

void lr_schedule(OptimizerState& opt, double val_loss, const ScheduleConfig& cfg) {
    if (!std::isfinite(val_loss)) throw NumericError("lr_schedule: non-finite loss");
    if (val_loss <= opt.best_loss - cfg.threshold) {
        opt.best_loss = val_loss;
        opt.stagnation = 0;
        return;
    }
    if (++opt.stagnation >= cfg.patience) {
        opt.lr = std::max(opt.lr * cfg.factor, cfg.min_lr);
        opt.stagnation = 0;
    }
}

EvalReport compute_metrics(std::span<const double> pred, std::span<const double> target, std::size_t horizon,
                           std::size_t channels) {
    if (pred.size() != target.size()) throw DimensionError("prediction/target sizes differ");
    const std::size_t per_window = horizon * channels;
    if (pred.empty() || per_window == 0 || pred.size() % per_window != 0) {
        throw ContractError("metrics need at least one complete window");
    }
    EvalReport report;
    report.windows = pred.size() / per_window;
    report.step_mse.assign(horizon, 0.0);
    double se = 0.0;
    double ae = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        se += d * d;
        ae += std::abs(d);
        report.step_mse[(i % per_window) / channels] += d * d;
    }
    const double n = static_cast<double>(pred.size());
    report.mse = se / n;
    report.mae = ae / n;
    for (double& s : report.step_mse) s /= static_cast<double>(report.windows * channels);
    return report;
}

EvalReport evaluate(const ModelState& state, const std::vector<data::Window>& windows, std::size_t batch_size) {
    if (windows.empty()) throw ContractError("evaluate needs at least one window");
    if (batch_size == 0) batch_size = windows.size();
    std::vector<double> pred;
    std::vector<double> target;
    for (std::size_t start = 0; start < windows.size(); start += batch_size) {
        std::vector<std::size_t> idx(std::min(batch_size, windows.size() - start));
        std::iota(idx.begin(), idx.end(), start);
        const auto batch = data::make_batch(windows, idx);
        const Tensor out = forward(state, batch.x);
        pred.insert(pred.end(), out.data().begin(), out.data().end());
        target.insert(target.end(), batch.y.data().begin(), batch.y.data().end());
    }
    return compute_metrics(pred, target, state.config().horizon, state.config().channels);
}

EvalReport evaluate_persistence(const std::vector<data::Window>& windows) {
    if (windows.empty()) throw ContractError("evaluate needs at least one window");
    const std::size_t lookback = windows[0].x.dim(0);
    const std::size_t channels = windows[0].x.dim(1);
    const std::size_t horizon = windows[0].y.dim(0);
    std::vector<double> pred;
    std::vector<double> target;
    for (const auto& w : windows) {
        auto x = w.x.data();
        for (std::size_t h = 0; h < horizon; ++h) {
            for (std::size_t c = 0; c < channels; ++c) pred.push_back(x[(lookback - 1) * channels + c]);
        }
        target.insert(target.end(), w.y.data().begin(), w.y.data().end());
    }
    return compute_metrics(pred, target, horizon, channels);
}

TrainResult train(const ModelConfig& config, const data::Dataset& ds, const data::WindowSpec& spec,
                  const TrainConfig& cfg) {
    if (config.lookback != spec.lookback || config.horizon != spec.horizon) {
        throw ConfigError("model lookback/horizon do not match the window spec");
    }
    if (config.channels != ds.channels()) {
        throw ConfigError("model expects " + std::to_string(config.channels) + " channels, data has " +
                          std::to_string(ds.channels()));
    }
    if (cfg.batch_size == 0) throw ConfigError("batch size must be >= 1");
    const auto train_windows = data::window_dataset(ds, data::Split::kTrain, spec);
    const auto val_windows = data::window_dataset(ds, data::Split::kVal, spec);

    TrainResult result{ModelState::init(config), ModelState(), 0, {}, false, {}};
    ModelState& state = result.final_state;
    result.best_state = state.clone();
    OptimizerState opt = make_optimizer(state.params(), cfg.lr);
    double best_val = std::numeric_limits<double>::infinity();

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= cfg.epochs && !result.diverged; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(end));
            const auto batch = data::make_batch(train_windows, idx);
            Tape tape;
            const Tensor loss = loss_mse(forward(state, batch.x), batch.y);
            const double value = loss.item();
            if (!std::isfinite(value)) {
                result.diverged = true;
                result.message = "training loss became non-finite at epoch " + std::to_string(epoch);
                break;
            }
            state.params().zero_grad();
            tape.backward(loss);
            clip_grad_norm(state.params(), cfg.clip_norm);
            adam_step(state.params(), opt, cfg.adam);
            loss_sum += value * static_cast<double>(idx.size());
        }
        if (result.diverged) break;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_mse = loss_sum / static_cast<double>(order.size());
        rec.val_mse = evaluate(state, val_windows).mse;
        rec.lr = opt.lr;
        if (!std::isfinite(rec.val_mse)) {
            result.diverged = true;
            result.message = "validation loss became non-finite at epoch " + std::to_string(epoch);
            break;
        }
        if (rec.val_mse < best_val) {
            best_val = rec.val_mse;
            result.best_epoch = epoch;
            result.best_state.params().assign_from(state.params());
        }
        lr_schedule(opt, rec.val_mse, cfg.schedule);
        result.log.push_back(rec);
        if (cfg.progress) {
            *cfg.progress << std::setprecision(6) << "epoch " << rec.epoch << "  train_mse " << rec.train_mse
                          << "  val_mse " << rec.val_mse << "  lr " << rec.lr << '\n';
        }
    }
    return result;
}

std::string format_log_csv(const std::vector<EpochRecord>& log) {
    std::ostringstream os;
    os << "epoch,train_mse,val_mse,lr\n" << std::setprecision(17);
    for (const auto& r : log) os << r.epoch << ',' << r.train_mse << ',' << r.val_mse << ',' << r.lr << '\n';
    return os.str();
}

}  // namespace msdft::training
