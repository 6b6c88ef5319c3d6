#include "msdft/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "msdft/errors.hpp"

namespace msdft::data {

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) cells.push_back(cell);
    if (!line.empty() && line.back() == sep) cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::optional<double> parse_double(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) return std::nullopt;
    double value = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

bool getline_any(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

}  // namespace

Dataset parse_csv(std::istream& in, const CsvOptions& options, const std::string& source) {
    Dataset ds;
    std::string line;
    std::size_t width = 0;
    std::vector<std::string> header;
    if (options.has_header) {
        if (!getline_any(in, line)) throw FormatError(source + ": empty file");
        header = split_line(line, ',');
        width = header.size();
    }
    std::vector<double> values;
    std::size_t row = 0;
    while (getline_any(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto cells = split_line(line, ',');
        if (width == 0) width = cells.size();
        if (cells.size() != width) {
            throw FormatError(source + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                              " columns, expected " + std::to_string(width));
        }
        for (std::size_t col = 0; col < cells.size(); ++col) {
            if (options.timestamp_col && *options.timestamp_col == col) {
                ds.timestamps.push_back(trim(cells[col]));
                continue;
            }
            const auto v = parse_double(cells[col]);
            if (!v) {
                throw FormatError(source + ": cannot parse '" + trim(cells[col]) + "' at row " + std::to_string(row) +
                                  ", column " + std::to_string(col + 1));
            }
            values.push_back(*v);
        }
    }
    if (row == 0) throw FormatError(source + ": no data rows");
    if (options.timestamp_col && *options.timestamp_col >= width) {
        throw FormatError(source + ": timestamp column " + std::to_string(*options.timestamp_col + 1) +
                          " beyond row width " + std::to_string(width));
    }
    const std::size_t channels = width - (options.timestamp_col ? 1 : 0);
    if (channels == 0) throw FormatError(source + ": no numeric columns");
    for (std::size_t col = 0; col < width; ++col) {
        if (options.timestamp_col && *options.timestamp_col == col) continue;
        ds.columns.push_back(header.empty() ? "ch" + std::to_string(ds.columns.size()) : trim(header[col]));
    }
    ds.values = Tensor::from({row, channels}, std::move(values));
    return ds;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV file: " + path.string());
    return parse_csv(in, options, path.string());
}

CsvOptions sniff_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV file: " + path.string());
    CsvOptions options;
    std::string first;
    if (!getline_any(in, first)) throw FormatError(path.string() + ": empty file");
    bool non_numeric = false;
    for (const auto& cell : split_line(first, ',')) non_numeric = non_numeric || !parse_double(cell);
    options.has_header = non_numeric;
    std::string data_row = first;
    if (options.has_header && !getline_any(in, data_row)) throw FormatError(path.string() + ": no data rows");
    const auto cells = split_line(data_row, ',');
    if (!cells.empty() && !parse_double(cells[0])) options.timestamp_col = 0;
    return options;
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write CSV file: " + path.string());
    const bool stamps = !ds.timestamps.empty();
    if (stamps) os << "date,";
    for (std::size_t c = 0; c < ds.columns.size(); ++c) os << (c ? "," : "") << ds.columns[c];
    os << '\n';
    os << std::setprecision(17);
    auto v = ds.values.data();
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        if (stamps) os << ds.timestamps[r] << ',';
        for (std::size_t c = 0; c < ds.channels(); ++c) os << (c ? "," : "") << v[r * ds.channels() + c];
        os << '\n';
    }
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::kTrain;
    if (name == "val") return Split::kVal;
    if (name == "test") return Split::kTest;
    throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

std::pair<std::size_t, std::size_t> split_range(const Dataset& ds, Split split) {
    if (!ds.is_split()) throw ContractError("dataset has not been split");
    switch (split) {
        case Split::kTrain: return {0, ds.train_end};
        case Split::kVal: return {ds.train_end, ds.val_end};
        case Split::kTest: return {ds.val_end, ds.rows()};
    }
    return {0, 0};
}

namespace {

// Minimum split length able to hold one window; 0 rows of context are needed
// for val/test when the lookback may come from earlier rows.
std::size_t required_rows(Split split, const WindowSpec& spec) {
    if (split == Split::kTrain || spec.policy == ContextPolicy::kWithinSplit) return spec.lookback + spec.horizon;
    return spec.horizon;
}

const char* split_name(Split split) {
    switch (split) {
        case Split::kTrain: return "train";
        case Split::kVal: return "val";
        case Split::kTest: return "test";
    }
    return "?";
}

}  // namespace

Dataset split_only(Dataset ds, const SplitRatios& ratios, const WindowSpec& spec) {
    if (ratios.train <= 0.0 || ratios.val <= 0.0 || ratios.test <= 0.0 ||
        std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
        throw ConfigError("split ratios must be positive and sum to 1");
    }
    const std::size_t total = ds.rows();
    ds.train_end = static_cast<std::size_t>(std::llround(static_cast<double>(total) * ratios.train));
    ds.val_end = static_cast<std::size_t>(std::llround(static_cast<double>(total) * (ratios.train + ratios.val)));
    if (ds.train_end == 0 || ds.val_end <= ds.train_end || ds.val_end >= total) {
        throw InsufficientDataError("series of " + std::to_string(total) + " rows is too short to split");
    }
    for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
        const auto [begin, end] = split_range(ds, s);
        if (end - begin < required_rows(s, spec)) {
            throw InsufficientDataError(std::string(split_name(s)) + " split has " + std::to_string(end - begin) +
                                        " rows; lookback " + std::to_string(spec.lookback) + " + horizon " +
                                        std::to_string(spec.horizon) + " needs " +
                                        std::to_string(required_rows(s, spec)));
        }
    }
    return ds;
}

Dataset normalize_with(Dataset ds, const std::vector<double>& mean, const std::vector<double>& stddev) {
    const std::size_t channels = ds.channels();
    if (mean.size() != channels || stddev.size() != channels) {
        throw DimensionError("normalisation statistics cover " + std::to_string(mean.size()) + " channels, data has " +
                             std::to_string(channels));
    }
    ds.values = ds.values.clone();  // the caller's tensor shares storage
    auto v = ds.values.mutable_data();
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        for (std::size_t c = 0; c < channels; ++c) v[r * channels + c] = (v[r * channels + c] - mean[c]) / stddev[c];
    }
    ds.mean = mean;
    ds.stddev = stddev;
    return ds;
}

Dataset split_normalize(Dataset ds, const SplitRatios& ratios, const WindowSpec& spec) {
    ds = split_only(std::move(ds), ratios, spec);
    const std::size_t channels = ds.channels();
    auto v = ds.values.data();
    std::vector<double> means(channels, 0.0);
    std::vector<double> stds(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < ds.train_end; ++r) sum += v[r * channels + c];
        const double mean = sum / static_cast<double>(ds.train_end);
        double sq = 0.0;
        for (std::size_t r = 0; r < ds.train_end; ++r) {
            const double d = v[r * channels + c] - mean;
            sq += d * d;
        }
        double sd = std::sqrt(sq / static_cast<double>(ds.train_end));
        if (sd < 1e-8) {
            const std::string name = c < ds.columns.size() ? ds.columns[c] : std::to_string(c);
            ds.warnings.push_back("channel '" + name + "' is constant on the train split; using std = 1");
            std::cerr << "warning: " << ds.warnings.back() << '\n';
            sd = 1.0;
        }
        means[c] = mean;
        stds[c] = sd;
    }
    return normalize_with(std::move(ds), means, stds);
}

std::vector<Window> window_dataset(const Dataset& ds, Split split, const WindowSpec& spec) {
    if (spec.stride < 1) throw ConfigError("window stride must be >= 1");
    const auto [begin, end] = split_range(ds, split);
    const std::size_t len = end - begin;
    if (len < required_rows(split, spec)) {
        throw InsufficientDataError(std::string(split_name(split)) + " split of " + std::to_string(len) +
                                    " rows cannot hold a window");
    }
    const bool borrow = split != Split::kTrain && spec.policy == ContextPolicy::kBorrowLookback;
    // first input row and number of windows
    std::size_t first = begin;
    std::size_t count = len - spec.lookback - spec.horizon + 1;
    if (borrow) {
        if (begin < spec.lookback) {
            throw InsufficientDataError("not enough rows before the split for a lookback of " +
                                        std::to_string(spec.lookback));
        }
        first = begin - spec.lookback;
        count = len - spec.horizon + 1;
    }
    const std::size_t channels = ds.channels();
    auto v = ds.values.data();
    std::vector<Window> windows;
    for (std::size_t i = 0; i < count; i += spec.stride) {
        const std::size_t s = first + i;
        auto row_block = [&](std::size_t from, std::size_t rows) {
            return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(from * channels),
                                       v.begin() + static_cast<std::ptrdiff_t>((from + rows) * channels));
        };
        windows.push_back({Tensor::from({spec.lookback, channels}, row_block(s, spec.lookback)),
                           Tensor::from({spec.horizon, channels}, row_block(s + spec.lookback, spec.horizon)), s});
    }
    return windows;
}

Batch make_batch(const std::vector<Window>& windows, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw ContractError("empty batch");
    const Shape xs = windows.at(indices[0]).x.shape();
    const Shape ys = windows.at(indices[0]).y.shape();
    std::vector<double> x, y;
    x.reserve(indices.size() * numel_of(xs));
    y.reserve(indices.size() * numel_of(ys));
    for (auto i : indices) {
        const auto& w = windows.at(i);
        x.insert(x.end(), w.x.data().begin(), w.x.data().end());
        y.insert(y.end(), w.y.data().begin(), w.y.data().end());
    }
    return {Tensor::from({indices.size(), xs[0], xs[1]}, std::move(x)),
            Tensor::from({indices.size(), ys[0], ys[1]}, std::move(y))};
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.rows < 1 || spec.channels < 1) throw ConfigError("synthetic series needs rows >= 1 and channels >= 1");
    for (double p : spec.periods) {
        if (!(p > 0.0)) throw ConfigError("synthetic periods must be positive");
    }
    std::vector<double> amps = spec.amplitudes;
    if (amps.empty()) amps.assign(spec.periods.size(), 1.0);
    if (amps.size() != spec.periods.size()) throw ConfigError("synthetic amplitudes must match periods");

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    std::vector<double> phases(spec.channels * spec.periods.size());
    for (double& p : phases) p = phase_dist(rng);
    std::normal_distribution<double> noise(0.0, spec.noise_std > 0.0 ? spec.noise_std : 1.0);

    std::vector<double> values(spec.rows * spec.channels);
    for (std::size_t t = 0; t < spec.rows; ++t) {
        for (std::size_t c = 0; c < spec.channels; ++c) {
            double v = 0.0;
            for (std::size_t j = 0; j < spec.periods.size(); ++j) {
                v += amps[j] * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / spec.periods[j] +
                                        phases[c * spec.periods.size() + j]);
            }
            if (spec.noise_std > 0.0) v += noise(rng);
            values[t * spec.channels + c] = v;
        }
    }
    Dataset ds;
    ds.values = Tensor::from({spec.rows, spec.channels}, std::move(values));
    for (std::size_t c = 0; c < spec.channels; ++c) ds.columns.push_back("ch" + std::to_string(c));
    return ds;
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
    SyntheticSpec spec;
    bool amplitudes_set = false;
    std::string normalized = text;
    for (char& ch : normalized) {
        if (ch == '\n') ch = ',';
    }
    auto parse_list = [](const std::string& key, const std::string& value) {
        std::vector<double> out;
        for (const auto& part : split_line(value, '/')) {
            const auto v = parse_double(part);
            if (!v) throw ConfigError("bad number '" + part + "' in synthetic key " + key);
            out.push_back(*v);
        }
        return out;
    };
    auto parse_number = [](const std::string& key, const std::string& value) {
        const auto v = parse_double(value);
        if (!v) throw ConfigError("bad number '" + value + "' for synthetic key " + key);
        return *v;
    };
    for (const auto& raw : split_line(normalized, ',')) {
        const std::string item = trim(raw);
        if (item.empty() || item[0] == '#') continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("synthetic spec entry '" + item + "' is not key=value");
        const std::string key = trim(item.substr(0, eq));
        const std::string value = trim(item.substr(eq + 1));
        if (key == "T" || key == "rows") {
            spec.rows = static_cast<std::size_t>(parse_number(key, value));
        } else if (key == "C" || key == "channels") {
            spec.channels = static_cast<std::size_t>(parse_number(key, value));
        } else if (key == "periods") {
            spec.periods = parse_list(key, value);
        } else if (key == "amplitudes") {
            spec.amplitudes = parse_list(key, value);
            amplitudes_set = true;
        } else if (key == "noise" || key == "noise_std") {
            spec.noise_std = parse_number(key, value);
        } else if (key == "seed") {
            spec.seed = static_cast<std::uint64_t>(parse_number(key, value));
        } else {
            throw ConfigError("unknown synthetic spec key '" + key + "'");
        }
    }
    if (!amplitudes_set) spec.amplitudes.assign(spec.periods.size(), 1.0);
    return spec;
}

}  // namespace msdft::data
