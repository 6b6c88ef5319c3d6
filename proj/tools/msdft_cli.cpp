// Command-line front end: train, eval, predict, periods, gradcheck.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "msdft/data.hpp"
#include "msdft/errors.hpp"
#include "msdft/gradcheck.hpp"
#include "msdft/model.hpp"
#include "msdft/spectral.hpp"
#include "msdft/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kSyntheticPrefix[] = "synthetic:";

struct DataSource {
    std::string spec;
    bool no_header = false;
    int timestamp_col = -1;  // -1: auto-detect
};

// "synthetic:key=value,..." or "synthetic:<file with key=value lines>" or a CSV path.
msdft::data::Dataset load_source(const DataSource& src) {
    const std::string prefix = kSyntheticPrefix;
    if (src.spec.rfind(prefix, 0) == 0) {
        std::string body = src.spec.substr(prefix.size());
        if (body.find('=') == std::string::npos) {
            std::ifstream in(body);
            if (!in) throw std::runtime_error("cannot read synthetic spec file: " + body);
            std::stringstream ss;
            ss << in.rdbuf();
            body = ss.str();
        }
        return msdft::data::generate_synthetic(msdft::data::parse_synthetic_spec(body));
    }
    msdft::data::CsvOptions options = msdft::data::sniff_csv(src.spec);
    if (src.no_header) options.has_header = false;
    if (src.timestamp_col >= 0) options.timestamp_col = static_cast<std::size_t>(src.timestamp_col);
    return msdft::data::load_csv(src.spec, options);
}

void add_source_options(CLI::App* cmd, DataSource& src) {
    cmd->add_option("--data", src.spec, "CSV path, or synthetic:<key=value,...> / synthetic:<spec file>")->required();
    cmd->add_flag("--no-header", src.no_header, "CSV has no header row");
    cmd->add_option("--timestamp-col", src.timestamp_col, "0-based timestamp column (default: auto-detect)");
}

json window_meta(const msdft::data::Dataset& ds, const msdft::data::SplitRatios& ratios) {
    return json{{"mean", ds.mean},
                {"stddev", ds.stddev},
                {"columns", ds.columns},
                {"ratios", {ratios.train, ratios.val, ratios.test}}};
}

msdft::data::WindowSpec spec_for(const msdft::ModelConfig& c) {
    msdft::data::WindowSpec spec;
    spec.lookback = c.lookback;
    spec.horizon = c.horizon;
    return spec;
}

msdft::data::SplitRatios ratios_from(const json& extra) {
    msdft::data::SplitRatios r;
    if (extra.contains("ratios")) {
        const auto v = extra.at("ratios").get<std::vector<double>>();
        if (v.size() == 3) r = {v[0], v[1], v[2]};
    }
    return r;
}

struct TrainArgs {
    DataSource src;
    msdft::ModelConfig model;
    msdft::training::TrainConfig train;
    std::string out = "model.msdft";
    std::string log;
    std::vector<double> ratios{0.7, 0.1, 0.2};
    bool quiet = false;
};

int run_train(TrainArgs& a) {
    msdft::data::Dataset raw = load_source(a.src);
    a.model.channels = raw.channels();
    a.model.seed = a.train.seed;
    const msdft::data::SplitRatios ratios{a.ratios.at(0), a.ratios.at(1), a.ratios.at(2)};
    const auto spec = spec_for(a.model);
    const auto ds = msdft::data::split_normalize(std::move(raw), ratios, spec);
    if (!a.quiet) a.train.progress = &std::cerr;

    auto result = msdft::training::train(a.model, ds, spec, a.train);
    const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
    std::ofstream(log_path) << msdft::training::format_log_csv(result.log);

    msdft::save_model(a.out, result.best_state, window_meta(ds, ratios));
    if (result.diverged) {
        std::cerr << "error: " << result.message << "; best checkpoint kept at " << a.out << '\n';
        return 2;
    }
    const auto test = msdft::training::evaluate(result.best_state,
                                                msdft::data::window_dataset(ds, msdft::data::Split::kTest, spec));
    std::cout << std::setprecision(8) << "best_epoch," << result.best_epoch << "\ntest_mse," << test.mse
              << "\ntest_mae," << test.mae << '\n';
    return 0;
}

msdft::data::Dataset prepared_for(const msdft::LoadedModel& loaded, const DataSource& src, bool split) {
    msdft::data::Dataset ds = load_source(src);
    const auto& c = loaded.state.config();
    if (ds.channels() != c.channels) {
        throw msdft::DimensionError("checkpoint expects " + std::to_string(c.channels) + " channels, data has " +
                                    std::to_string(ds.channels()));
    }
    if (split) ds = msdft::data::split_only(std::move(ds), ratios_from(loaded.extra), spec_for(c));
    if (loaded.extra.contains("mean")) {
        ds = msdft::data::normalize_with(std::move(ds), loaded.extra.at("mean").get<std::vector<double>>(),
                                         loaded.extra.at("stddev").get<std::vector<double>>());
    }
    return ds;
}

int run_eval(const std::string& ckpt, const DataSource& src, const std::string& split_name, const std::string& curve) {
    const auto loaded = msdft::load_model(ckpt);
    const auto ds = prepared_for(loaded, src, true);
    const auto windows =
        msdft::data::window_dataset(ds, msdft::data::parse_split(split_name), spec_for(loaded.state.config()));
    const auto report = msdft::training::evaluate(loaded.state, windows);
    std::cout << std::setprecision(17) << report.mse << ',' << report.mae << '\n';
    std::ofstream os(curve);
    os << "step,mse\n" << std::setprecision(17);
    for (std::size_t i = 0; i < report.step_mse.size(); ++i) os << i + 1 << ',' << report.step_mse[i] << '\n';
    return 0;
}

int run_predict(const std::string& ckpt, const DataSource& src, std::size_t at) {
    const auto loaded = msdft::load_model(ckpt);
    const auto ds = prepared_for(loaded, src, false);
    const auto& c = loaded.state.config();
    if (at < c.lookback || at > ds.rows()) {
        throw msdft::InsufficientDataError("--at " + std::to_string(at) + " needs rows [" +
                                           std::to_string(static_cast<long long>(at) - static_cast<long long>(c.lookback)) +
                                           ", " + std::to_string(at) + ") inside a series of " +
                                           std::to_string(ds.rows()) + " rows");
    }
    auto v = ds.values.data();
    const std::size_t begin = (at - c.lookback) * c.channels;
    const msdft::Tensor x = msdft::Tensor::from(
        {1, c.lookback, c.channels},
        std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                            v.begin() + static_cast<std::ptrdiff_t>(begin + c.lookback * c.channels)));
    const msdft::Tensor forecast = msdft::forward(loaded.state, x);
    const auto pred = forecast.data();
    std::vector<std::string> columns = ds.columns;
    for (std::size_t ch = 0; ch < c.channels; ++ch) std::cout << (ch ? "," : "") << columns.at(ch);
    std::cout << '\n' << std::setprecision(17);
    for (std::size_t h = 0; h < c.horizon; ++h) {
        for (std::size_t ch = 0; ch < c.channels; ++ch) {
            double value = pred[h * c.channels + ch];
            if (!ds.mean.empty()) value = value * ds.stddev[ch] + ds.mean[ch];
            std::cout << (ch ? "," : "") << value;
        }
        std::cout << '\n';
    }
    return 0;
}

int run_periods(const DataSource& src, std::size_t lookback, std::size_t k, std::size_t at) {
    const auto ds = load_source(src);
    if (at + lookback > ds.rows()) {
        throw msdft::InsufficientDataError("window [" + std::to_string(at) + ", " + std::to_string(at + lookback) +
                                           ") exceeds " + std::to_string(ds.rows()) + " rows");
    }
    auto v = ds.values.data();
    const std::size_t channels = ds.channels();
    const msdft::Tensor window = msdft::Tensor::from(
        {lookback, channels}, std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(at * channels),
                                                  v.begin() + static_cast<std::ptrdiff_t>((at + lookback) * channels)));
    const auto profile = msdft::spectral::analyze(window, k);
    std::cout << "rank,frequency,period,amplitude\n" << std::setprecision(17);
    for (std::size_t i = 0; i < profile.size(); ++i) {
        std::cout << i + 1 << ',' << profile.frequencies[i] << ',' << profile.periods[i] << ','
                  << profile.amplitudes[i] << '\n';
    }
    return 0;
}

int run_gradcheck(const std::string& name, std::uint64_t seed) {
    const auto report = msdft::gradcheck::run_preset(msdft::gradcheck::preset(name), seed);
    std::cout << "checked " << report.checked << " parameter elements\n"
              << "max relative error " << report.max_relative_error << '\n'
              << "max absolute error (tiny gradients) " << report.max_absolute_error << '\n';
    for (const auto& f : report.failures) {
        std::cout << "FAIL " << f.name << '[' << f.index << "] analytic " << f.analytic << " numeric " << f.numeric
                  << '\n';
    }
    std::cout << (report.passed() ? "gradcheck passed\n" : "gradcheck FAILED\n");
    return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-scale deformable-convolution time-series forecaster"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train a model and write the best-validation checkpoint");
    add_source_options(train, train_args.src);
    train->add_option("--lookback", train_args.model.lookback, "Input window length L")->capture_default_str();
    train->add_option("--horizon", train_args.model.horizon, "Forecast horizon")->capture_default_str();
    train->add_option("--scales", train_args.model.scales, "Number of spectral scales k")->capture_default_str();
    train->add_option("--embed", train_args.model.embed, "Embedding width C_m")->capture_default_str();
    train->add_option("--taps", train_args.model.taps, "Deformable kernel taps")->capture_default_str();
    train->add_option("--hidden", train_args.model.hidden, "MLP hidden width (0 = 4*C_m)")->capture_default_str();
    train->add_option("--epochs", train_args.train.epochs)->capture_default_str();
    train->add_option("--batch", train_args.train.batch_size)->capture_default_str();
    train->add_option("--lr", train_args.train.lr, "Initial learning rate")->capture_default_str();
    train->add_option("--clip", train_args.train.clip_norm, "Global gradient-norm clip (<= 0 disables)")
        ->capture_default_str();
    train->add_option("--seed", train_args.train.seed)->capture_default_str();
    train->add_option("--ratios", train_args.ratios, "train val test split ratios")->expected(3)->capture_default_str();
    train->add_option("--out", train_args.out, "Checkpoint path")->capture_default_str();
    train->add_option("--log", train_args.log, "Epoch log CSV (default <out>.log.csv)");
    train->add_flag("--quiet", train_args.quiet, "Do not print per-epoch progress");

    DataSource eval_src;
    std::string eval_ckpt;
    std::string eval_split = "test";
    std::string eval_curve = "eval_curve.csv";
    auto* eval = app.add_subcommand("eval", "Print mse,mae on a split and write the per-step curve");
    eval->add_option("--ckpt", eval_ckpt)->required();
    add_source_options(eval, eval_src);
    eval->add_option("--split", eval_split)->check(CLI::IsMember({"train", "val", "test"}))->capture_default_str();
    eval->add_option("--curve", eval_curve, "Per-step MSE output file")->capture_default_str();

    DataSource pred_src;
    std::string pred_ckpt;
    std::size_t pred_at = 0;
    auto* predict = app.add_subcommand("predict", "Forecast the horizon starting at a row");
    predict->add_option("--ckpt", pred_ckpt)->required();
    add_source_options(predict, pred_src);
    predict->add_option("--at", pred_at, "First forecast row; the lookback ends just before it")->required();

    DataSource per_src;
    std::size_t per_lookback = 96;
    std::size_t per_k = 3;
    std::size_t per_at = 0;
    auto* periods = app.add_subcommand("periods", "Print the dominant periods of one window");
    add_source_options(periods, per_src);
    periods->add_option("--lookback", per_lookback)->capture_default_str();
    periods->add_option("--k", per_k)->capture_default_str();
    periods->add_option("--at", per_at, "First row of the window")->capture_default_str();

    std::string gc_config = "small";
    std::uint64_t gc_seed = 42;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every model gradient");
    gradcheck->add_option("--config", gc_config, "Preset: small or tiny")->capture_default_str();
    gradcheck->add_option("--seed", gc_seed)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return run_train(train_args);
        if (*eval) return run_eval(eval_ckpt, eval_src, eval_split, eval_curve);
        if (*predict) return run_predict(pred_ckpt, pred_src, pred_at);
        if (*periods) return run_periods(per_src, per_lookback, per_k, per_at);
        if (*gradcheck) return run_gradcheck(gc_config, gc_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
