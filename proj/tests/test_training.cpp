#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "msdft/errors.hpp"
#include "msdft/training.hpp"
#include "test_util.hpp"

using namespace msdft;
using namespace msdft::training;
using msdft::testing::random_tensor;
using msdft::testing::values;

namespace {

ParameterStore single(double value, double grad) {
    ParameterStore ps;
    auto& t = ps.add("w", Tensor::from({1}, {value}, true));
    t.mutable_grad()[0] = grad;
    return ps;
}

struct SmallRun {
    ModelConfig model;
    data::WindowSpec spec;
    data::Dataset ds;
};

SmallRun small_run() {
    SmallRun r;
    r.model.lookback = 24;
    r.model.horizon = 6;
    r.model.channels = 2;
    r.model.embed = 4;
    r.spec.lookback = 24;
    r.spec.horizon = 6;
    data::SyntheticSpec syn;
    syn.rows = 160;
    syn.periods = {12, 6};
    syn.noise_std = 0.05;
    r.ds = data::split_normalize(data::generate_synthetic(syn), {}, r.spec);
    return r;
}

// Straightforward two-pass reference for the metric definitions.
std::pair<double, double> metric_oracle(const std::vector<double>& p, const std::vector<double>& y) {
    double sq = 0, ab = 0;
    for (std::size_t i = 0; i < p.size(); ++i) sq += (p[i] - y[i]) * (p[i] - y[i]);
    for (std::size_t i = 0; i < p.size(); ++i) ab += std::abs(p[i] - y[i]);
    return {sq / static_cast<double>(p.size()), ab / static_cast<double>(p.size())};
}

}  // namespace

TEST(Adam, FirstStepIsLearningRate) {
    auto ps = single(0.5, 1.0);
    auto opt = make_optimizer(ps, 1e-3);
    adam_step(ps, opt);
    EXPECT_NEAR(ps.get("w").data()[0], 0.5 - 1e-3 / (1.0 + 1e-8), 1e-15);
    EXPECT_EQ(opt.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParametersAndDecaysMoments) {
    auto ps = single(0.5, 1.0);
    auto opt = make_optimizer(ps, 1e-3);
    adam_step(ps, opt);
    const double after_first = ps.get("w").data()[0];
    const double m = opt.m[0][0], v = opt.v[0][0];
    ps.get("w").mutable_grad()[0] = 0.0;
    adam_step(ps, opt);
    EXPECT_DOUBLE_EQ(opt.m[0][0], 0.9 * m);
    EXPECT_DOUBLE_EQ(opt.v[0][0], 0.999 * v);
    // momentum keeps moving the parameter; an all-zero history would not
    auto fresh = single(0.25, 0.0);
    auto fresh_opt = make_optimizer(fresh, 1e-3);
    adam_step(fresh, fresh_opt);
    EXPECT_EQ(fresh.get("w").data()[0], 0.25);
    EXPECT_LT(ps.get("w").data()[0], after_first);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
    auto ps = single(0.5, std::numeric_limits<double>::quiet_NaN());
    auto opt = make_optimizer(ps, 1e-3);
    try {
        adam_step(ps, opt);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("w"), std::string::npos);
    }
    EXPECT_EQ(ps.get("w").data()[0], 0.5);
    EXPECT_EQ(opt.step, 0u);
}

TEST(ClipGradNorm, RescalesToMaxNorm) {
    ParameterStore ps;
    ps.add("a", Tensor::from({2}, {0, 0}, true));
    ps.add("b", Tensor::from({1}, {0}, true));
    auto& a = ps.get("a");
    auto& b = ps.get("b");
    a.mutable_grad()[0] = 3;
    a.mutable_grad()[1] = 0;
    b.mutable_grad()[0] = 4;
    EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
    EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
    EXPECT_NEAR(b.grad()[0], 0.8, 1e-15);
    EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 10.0), 1.0);
    EXPECT_NEAR(b.grad()[0], 0.8, 1e-15);
}

TEST(LrSchedule, ImprovingKeepsRate) {
    OptimizerState opt;
    opt.lr = 1e-4;
    for (double loss : {1.0, 0.9, 0.8, 0.7, 0.6}) lr_schedule(opt, loss);
    EXPECT_EQ(opt.lr, 1e-4);
}

TEST(LrSchedule, PlateauHalves) {
    OptimizerState opt;
    opt.lr = 1e-4;
    lr_schedule(opt, 1.0);
    for (int i = 0; i < 3; ++i) lr_schedule(opt, 1.0);
    EXPECT_EQ(opt.lr, 5e-5);
}

TEST(LrSchedule, FloorsAtMinimum) {
    OptimizerState opt;
    opt.lr = 1e-4;
    for (int i = 0; i < 200; ++i) lr_schedule(opt, 1.0);
    EXPECT_EQ(opt.lr, 1e-6);
}

TEST(Metrics, MatchTwoPassOracle) {
    std::mt19937_64 rng(80);
    const auto p = values(random_tensor({7, 4, 3}, rng, -2, 2));
    const auto y = values(random_tensor({7, 4, 3}, rng, -2, 2));
    const auto r = compute_metrics(p, y, 4, 3);
    const auto [mse, mae] = metric_oracle(p, y);
    EXPECT_NEAR(r.mse, mse, 1e-12);
    EXPECT_NEAR(r.mae, mae, 1e-12);
    ASSERT_EQ(r.step_mse.size(), 4u);
    double avg = 0;
    for (double s : r.step_mse) avg += s / 4;
    EXPECT_NEAR(avg, mse, 1e-12);
    EXPECT_EQ(r.windows, 7u);
}

TEST(Metrics, Examples) {
    const std::vector<double> y{1, 2, 3, 4};
    const auto perfect = compute_metrics(y, y, 2, 1);
    EXPECT_EQ(perfect.mse, 0.0);
    EXPECT_EQ(perfect.mae, 0.0);
    const std::vector<double> off{3, 4, 5, 6};
    const auto r = compute_metrics(off, y, 2, 1);
    EXPECT_EQ(r.mse, 4.0);
    EXPECT_EQ(r.mae, 2.0);
    EXPECT_THROW(evaluate_persistence({}), ContractError);
}

TEST(Persistence, RepeatsLastRow) {
    data::Window w;
    w.x = Tensor::from({3, 1}, {1, 2, 5});
    w.y = Tensor::from({2, 1}, {6, 3});
    const auto r = evaluate_persistence({w});
    EXPECT_EQ(r.mse, (1.0 + 4.0) / 2);
    EXPECT_EQ(r.mae, (1.0 + 2.0) / 2);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    const auto run = small_run();
    auto state = ModelState::init(run.model);
    const auto path = std::filesystem::temp_directory_path() / "msdft_ckpt_test.msdft";
    save_model(path, state, {{"note", "x"}});
    const auto loaded = load_model(path);
    EXPECT_EQ(loaded.extra.at("note"), "x");
    EXPECT_EQ(loaded.state.config().embed, 4u);
    const auto windows = data::window_dataset(run.ds, data::Split::kTest, run.spec);
    const auto a = evaluate(state, windows), b = evaluate(loaded.state, windows);
    EXPECT_EQ(a.mse, b.mse);
    EXPECT_EQ(a.mae, b.mae);
    EXPECT_EQ(a.step_mse, b.step_mse);
    std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsBadFiles) {
    const auto path = std::filesystem::temp_directory_path() / "msdft_bad.msdft";
    {
        std::ofstream os(path, std::ios::binary);
        os << "NOTMAGIC\n";
    }
    EXPECT_THROW(load_checkpoint(path), FormatError);
    ParameterStore ps;
    ps.add("a", Tensor::from({3}, {1, 2, 3}));
    save_checkpoint(path, ps, "{}");
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
    EXPECT_THROW(load_checkpoint(path), FormatError);
    std::filesystem::remove(path);
}

TEST(Train, SeededRunsAreIdentical) {
    const auto run = small_run();
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.lr = 1e-3;
    const auto a = train(run.model, run.ds, run.spec, cfg);
    const auto b = train(run.model, run.ds, run.spec, cfg);
    EXPECT_EQ(format_log_csv(a.log), format_log_csv(b.log));
    EXPECT_EQ(values(a.final_state.params().get("head.w1")), values(b.final_state.params().get("head.w1")));
}

TEST(Train, LossDecreases) {
    const auto run = small_run();
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.batch_size = 8;
    cfg.lr = 1e-3;
    const auto r = train(run.model, run.ds, run.spec, cfg);
    ASSERT_EQ(r.log.size(), 8u);
    EXPECT_LT(r.log.back().train_mse, r.log.front().train_mse);
    EXPECT_FALSE(r.diverged);
    EXPECT_GE(r.best_epoch, 1u);
}

TEST(Train, BatchLargerThanWindowCount) {
    const auto run = small_run();
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 10000;
    EXPECT_NO_THROW(train(run.model, run.ds, run.spec, cfg));
}

TEST(Train, LogFormat) {
    const std::vector<EpochRecord> log{{1, 0.5, 0.25, 1e-4}};
    EXPECT_EQ(format_log_csv(log), "epoch,train_mse,val_mse,lr\n1,0.5,0.25,0.0001\n");
}
