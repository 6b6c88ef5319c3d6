#include "msdft/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "msdft/errors.hpp"
#include "msdft/ops.hpp"
#include "msdft/patching.hpp"

namespace msdft {

std::size_t ModelConfig::max_patch() const { return patching::patch_length(lookback); }

void ModelConfig::validate() const {
    if (lookback < 8) throw ConfigError("lookback L must be >= 8, got " + std::to_string(lookback));
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (channels < 1) throw ConfigError("channel count must be >= 1");
    if (embed < 1) throw ConfigError("embedding width must be >= 1");
    if (taps < 1) throw ConfigError("kernel taps must be >= 1");
    if (scales < 1 || scales > lookback / 2) {
        throw ConfigError("scales k must be in [1, " + std::to_string(lookback / 2) + "], got " +
                          std::to_string(scales));
    }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"lookback", c.lookback}, {"horizon", c.horizon}, {"channels", c.channels},
                       {"embed", c.embed},       {"scales", c.scales},   {"taps", c.taps},
                       {"hidden", c.hidden},     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    j.at("lookback").get_to(c.lookback);
    j.at("horizon").get_to(c.horizon);
    j.at("channels").get_to(c.channels);
    j.at("embed").get_to(c.embed);
    j.at("scales").get_to(c.scales);
    j.at("taps").get_to(c.taps);
    j.at("hidden").get_to(c.hidden);
    j.at("seed").get_to(c.seed);
}

namespace {

struct ParamSpec {
    std::string name;
    Shape shape;
    double bound;  // U(-bound, bound); 0 means zero-initialised
};

std::vector<ParamSpec> layout(const ModelConfig& c) {
    const double cm = static_cast<double>(c.embed);
    const std::size_t hidden = c.hidden_width();
    auto inv_sqrt = [](double fan_in) { return 1.0 / std::sqrt(fan_in); };
    std::vector<ParamSpec> specs;
    specs.push_back({"embed.weight", {c.channels, c.embed}, inv_sqrt(static_cast<double>(c.channels))});
    specs.push_back({"embed.bias", {c.embed}, 0.0});
    for (std::size_t i = 0; i < c.scales; ++i) {
        const std::string p = "scale" + std::to_string(i) + ".";
        specs.push_back({p + "patch.weight", {c.max_patch(), c.embed, c.embed},
                         inv_sqrt(static_cast<double>(c.max_patch()) * cm)});
        specs.push_back({p + "patch.bias", {c.embed}, 0.0});
        specs.push_back({p + "deform.base", {c.taps, c.embed, c.embed},
                         std::sqrt(1.0 / (static_cast<double>(c.taps) * cm))});
        for (const char* head : {"alpha_intra", "alpha_inter"}) {
            specs.push_back({p + head + ".w1", {c.embed, c.embed}, inv_sqrt(cm)});
            specs.push_back({p + head + ".b1", {c.embed}, 0.0});
            specs.push_back({p + head + ".w2", {c.embed, c.taps}, 0.0});
            specs.push_back({p + head + ".b2", {c.taps}, 0.0});
        }
        specs.push_back({p + "offset.w1", {2 * c.embed, c.embed}, inv_sqrt(2.0 * cm)});
        specs.push_back({p + "offset.b1", {c.embed}, 0.0});
        specs.push_back({p + "offset.w2", {c.embed, c.taps}, 0.0});
        specs.push_back({p + "offset.b2", {c.taps}, 0.0});
    }
    const std::size_t features = c.lookback * c.embed;
    specs.push_back({"head.w1", {features, hidden}, inv_sqrt(static_cast<double>(features))});
    specs.push_back({"head.b1", {hidden}, 0.0});
    specs.push_back({"head.w2", {hidden, c.horizon * c.channels}, inv_sqrt(static_cast<double>(hidden))});
    specs.push_back({"head.b2", {c.horizon * c.channels}, 0.0});
    return specs;
}

deformable::TwoLayerNet net(const ParameterStore& params, const std::string& prefix) {
    return {params.get(prefix + ".w1"), params.get(prefix + ".b1"), params.get(prefix + ".w2"),
            params.get(prefix + ".b2")};
}

}  // namespace

std::size_t parameter_count(const ModelConfig& config) {
    std::size_t n = 0;
    for (const auto& spec : layout(config)) n += numel_of(spec.shape);
    return n;
}

ModelState ModelState::init(const ModelConfig& config) {
    config.validate();
    ModelState state;
    state.config_ = config;
    std::mt19937_64 rng(config.seed);
    for (const auto& spec : layout(config)) {
        std::vector<double> values(numel_of(spec.shape), 0.0);
        if (spec.bound > 0.0) {
            std::uniform_real_distribution<double> dist(-spec.bound, spec.bound);
            for (double& v : values) v = dist(rng);
        }
        state.params_.add(spec.name, Tensor::from(spec.shape, std::move(values), true));
    }
    return state;
}

ModelState ModelState::from_parameters(const ModelConfig& config, ParameterStore params) {
    config.validate();
    const auto specs = layout(config);
    if (specs.size() != params.size()) {
        throw FormatError("parameter set has " + std::to_string(params.size()) + " tensors, config expects " +
                          std::to_string(specs.size()));
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
        auto& entry = params.entries()[i];
        if (entry.name != specs[i].name || entry.value.shape() != specs[i].shape) {
            throw FormatError("parameter " + entry.name + " " + shape_str(entry.value.shape()) + " does not match " +
                              specs[i].name + " " + shape_str(specs[i].shape));
        }
        entry.value.set_requires_grad(true);
    }
    ModelState state;
    state.config_ = config;
    state.params_ = std::move(params);
    return state;
}

ModelState ModelState::clone() const {
    ModelState copy;
    copy.config_ = config_;
    copy.params_ = params_.clone();
    return copy;
}

deformable::DeformableKernel ModelState::kernel(std::size_t scale, std::size_t period) const {
    const std::string p = "scale" + std::to_string(scale) + ".";
    deformable::DeformableKernel k;
    k.base = params_.get(p + "deform.base");
    k.alpha_intra = net(params_, p + "alpha_intra");
    k.alpha_inter = net(params_, p + "alpha_inter");
    k.offset = net(params_, p + "offset");
    k.offset_bound = deformable::offset_bound(period);
    return k;
}

aggregation::HeadParams ModelState::head() const {
    return {params_.get("head.w1"), params_.get("head.b1"), params_.get("head.w2"), params_.get("head.b2")};
}

Tensor forward(const ModelState& state, const Tensor& x, ForwardTrace* trace) {
    const ModelConfig& c = state.config();
    if (x.rank() != 3 || x.dim(1) != c.lookback || x.dim(2) != c.channels) {
        throw DimensionError("forward expects [B, " + std::to_string(c.lookback) + ", " + std::to_string(c.channels) +
                             "], got " + shape_str(x.shape()));
    }
    for (double v : x.data()) {
        if (!std::isfinite(v)) throw NumericError("forward: non-finite input value");
    }
    const ParameterStore& params = state.params();
    const Tensor& embed_w = params.get("embed.weight");
    const Tensor& embed_b = params.get("embed.bias");
    const std::size_t batch = x.dim(0);
    const std::size_t window = c.lookback * c.channels;
    auto xv = x.data();

    std::vector<Tensor> aggregated;
    std::vector<Tensor> embedded;
    for (std::size_t b = 0; b < batch; ++b) {
        const Tensor sample = Tensor::from({c.lookback, c.channels},
                                           std::vector<double>(xv.begin() + static_cast<std::ptrdiff_t>(b * window),
                                                               xv.begin() + static_cast<std::ptrdiff_t>((b + 1) * window)));
        const spectral::SpectralProfile profile = spectral::analyze(sample, c.scales);
        const Tensor emb = patching::embed_channels(sample, embed_w, embed_b);

        SampleTrace sample_trace;
        std::vector<Tensor> reps;
        for (std::size_t i = 0; i < c.scales; ++i) {
            const std::size_t period = profile.periods[i];
            const std::size_t patch = patching::patch_length(period);
            const std::string p = "scale" + std::to_string(i) + ".";
            const Tensor& bank = params.get(p + "patch.weight");
            const Tensor conv_w = patch == bank.dim(0) ? bank : ops::slice(bank, 0, 0, patch);
            const Tensor patches = patching::patchify(emb, patch, conv_w, params.get(p + "patch.bias"));
            const auto pt = patching::reshape_3d(patches, patching::pad_length(c.lookback, patch));
            const auto kernel = state.kernel(i, period);
            const auto out = deformable::apply(pt, kernel);
#ifndef NDEBUG
            for (double d : out.delta.data()) {
                if (std::abs(d) > static_cast<double>(kernel.offset_bound)) {
                    throw ContractError("sampling offset exceeds its bound");
                }
            }
#endif
            if (trace) {
                sample_trace.scales.push_back({period, patch, kernel.offset_bound,
                                               {out.alpha.data().begin(), out.alpha.data().end()},
                                               {out.delta.data().begin(), out.delta.data().end()}});
            }
            reps.push_back(patching::unpatchify(out.features, c.lookback));
        }
        aggregated.push_back(aggregation::aggregate(reps, profile));
        embedded.push_back(emb);
        if (trace) {
            sample_trace.profile = profile;
            trace->samples.push_back(std::move(sample_trace));
        }
    }
    const Tensor agg = batch == 1 ? ops::reshape(aggregated[0], {1, c.lookback, c.embed}) : ops::stack(aggregated);
    const Tensor emb = batch == 1 ? ops::reshape(embedded[0], {1, c.lookback, c.embed}) : ops::stack(embedded);
    return aggregation::forecast_head(agg, emb, state.head(), c.horizon, c.channels);
}

Tensor loss_mse(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw DimensionError("loss_mse shapes differ: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
    }
    const Tensor diff = ops::sub(pred, target);
    return ops::mean(ops::mul(diff, diff));
}

void save_model(const std::filesystem::path& path, const ModelState& state, const nlohmann::json& extra) {
    nlohmann::json meta;
    meta["config"] = state.config();
    meta["extra"] = extra;
    save_checkpoint(path, state.params(), meta.dump());
}

LoadedModel load_model(const std::filesystem::path& path) {
    Checkpoint ckpt = load_checkpoint(path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(ckpt.metadata);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint metadata is not valid JSON: " + std::string(e.what()));
    }
    if (!meta.contains("config")) throw FormatError("checkpoint metadata lacks a model config");
    const auto config = meta.at("config").get<ModelConfig>();
    return {ModelState::from_parameters(config, std::move(ckpt.params)),
            meta.value("extra", nlohmann::json::object())};
}

}  // namespace msdft
