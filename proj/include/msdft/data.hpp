#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "msdft/tensor.hpp"

namespace msdft::data {

/// A multivariate series [T_total, C] with optional chronological split and
/// z-score statistics computed on the train split.
struct Dataset {
    Tensor values;
    std::vector<std::string> columns;
    std::vector<std::string> timestamps;  // empty when the file has no timestamp column
    std::size_t train_end = 0;            // 0 while unsplit
    std::size_t val_end = 0;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<std::string> warnings;

    std::size_t rows() const { return values.dim(0); }
    std::size_t channels() const { return values.dim(1); }
    bool is_split() const { return train_end > 0; }
};

struct CsvOptions {
    bool has_header = true;
    std::optional<std::size_t> timestamp_col;  // 0-based file column
};

/// Errors report 1-based data-row and file-column coordinates.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options);
Dataset parse_csv(std::istream& in, const CsvOptions& options, const std::string& source = "<stream>");

/// Guesses the layout: header present when the first line has a non-numeric
/// cell; timestamp column 0 when the first data row's first cell is non-numeric.
CsvOptions sniff_csv(const std::filesystem::path& path);

/// Values written with 17 significant digits so re-reading is bit-exact.
void write_csv(const std::filesystem::path& path, const Dataset& ds);

struct SplitRatios {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

enum class Split { kTrain, kVal, kTest };

Split parse_split(const std::string& name);

/// How val/test windows obtain their lookback rows.
enum class ContextPolicy {
    kWithinSplit,     // inputs and targets both stay inside the split
    kBorrowLookback,  // targets stay inside the split; inputs may reach back into earlier rows
};

struct WindowSpec {
    std::size_t lookback = 96;
    std::size_t horizon = 24;
    std::size_t stride = 1;
    ContextPolicy policy = ContextPolicy::kBorrowLookback;
};

/**
 * Chronological split at round(T * train) and round(T * (train + val)), then
 * per-channel z-scoring with train-split statistics. A channel whose train
 * std is below 1e-8 keeps std = 1 and gets a warning. Throws
 * InsufficientDataError when a split cannot hold one window under `spec`.
 */
Dataset split_normalize(Dataset ds, const SplitRatios& ratios, const WindowSpec& spec);

/// The boundary computation and size checks of split_normalize, without
/// touching the values.
Dataset split_only(Dataset ds, const SplitRatios& ratios, const WindowSpec& spec);

/// z-scores every row with externally supplied statistics (e.g. from a
/// checkpoint).
Dataset normalize_with(Dataset ds, const std::vector<double>& mean, const std::vector<double>& stddev);

struct Window {
    Tensor x;               // [L, C]
    Tensor y;               // [P_horizon, C]
    std::size_t start = 0;  // first input row
};

std::vector<Window> window_dataset(const Dataset& ds, Split split, const WindowSpec& spec);

/// Rows [begin, end) of a split.
std::pair<std::size_t, std::size_t> split_range(const Dataset& ds, Split split);

struct Batch {
    Tensor x;  // [B, L, C]
    Tensor y;  // [B, P_horizon, C]
};

Batch make_batch(const std::vector<Window>& windows, const std::vector<std::size_t>& indices);

struct SyntheticSpec {
    std::vector<double> periods{24.0, 12.0};
    std::vector<double> amplitudes;  // defaults to 1 per period
    double noise_std = 0.0;
    std::size_t rows = 400;
    std::size_t channels = 2;
    std::uint64_t seed = 42;
};

/// channel c = sum_j A_j sin(2 pi t / p_j + phi_{c,j}) + N(0, noise_std^2),
/// phases drawn from the seed.
Dataset generate_synthetic(const SyntheticSpec& spec);

/**
 * Parses "key=value" pairs separated by commas or newlines. Keys: T (or rows),
 * C (or channels), periods, amplitudes (lists separated by '/'), noise, seed.
 * Lines starting with '#' are ignored.
 */
SyntheticSpec parse_synthetic_spec(const std::string& text);

}  // namespace msdft::data
