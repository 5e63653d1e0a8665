#include "kunet/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "kunet/text.hpp"

namespace kunet {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::size_t boundary_index(double cumulative_ratio, std::size_t n) {
    // floor with a small guard so exact products like 0.7*10000 do not land
    // one below the intended integer.
    return static_cast<std::size_t>(
        std::floor(cumulative_ratio * static_cast<double>(n) + 1e-6));
}

}  // namespace

const char* to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::ds1: return "ds1";
        case DatasetKind::ds2: return "ds2";
        case DatasetKind::ds3: return "ds3";
    }
    return "?";
}

DatasetKind dataset_kind_from_string(const std::string& name) {
    if (name == "ds1") return DatasetKind::ds1;
    if (name == "ds2") return DatasetKind::ds2;
    if (name == "ds3") return DatasetKind::ds3;
    fail("unknown dataset kind '" + name + "' (expected ds1|ds2|ds3)");
}

double series_value(DatasetKind kind, std::size_t t) {
    const double td = static_cast<double>(t);
    double sum = 0.0;
    switch (kind) {
        case DatasetKind::ds1:
            for (double f : kFrequencies) sum += std::sin(kTwoPi * f * td / kBasePeriod);
            return sum;
        case DatasetKind::ds2:
            for (std::size_t k = 0; k < kFrequencies.size(); ++k)
                sum += std::sin(kTwoPi * kFrequencies[k] * td / kBasePeriod +
                                static_cast<double>(k + 1) * std::numbers::pi / 5.0);
            return sum;
        case DatasetKind::ds3: {
            for (std::size_t k = 0; k < kFrequencies.size(); ++k)
                sum += std::sin(kTwoPi * kFrequencies[k] * td / kBasePeriod +
                                static_cast<double>(k + 1) * std::numbers::pi / 5.0) /
                       static_cast<double>(k + 1);
            const double envelope = std::sin(kTwoPi * td / (8.0 * kBasePeriod));
            return envelope * sum;
        }
    }
    return 0.0;
}

SeriesDataset generate(DatasetKind kind, std::size_t n, Rng& rng) {
    (void)rng;  // closed forms are noise-free; see header.
    if (n < 2) fail("generate: series length must be at least 2, got " + std::to_string(n));
    SeriesDataset ds;
    ds.name = to_string(kind);
    ds.values.resize(n);
    for (std::size_t t = 0; t < n; ++t) ds.values[t] = series_value(kind, t);
    return ds;
}

SeriesDataset split(SeriesDataset series, const std::array<double, 3>& ratios) {
    double sum = 0.0;
    for (double r : ratios) {
        if (r <= 0.0) fail("split: ratios must be positive (empty partition)");
        sum += r;
    }
    if (std::fabs(sum - 1.0) > 1e-9) fail("split: ratios must sum to 1");
    const std::size_t n = series.size();
    series.train_end = boundary_index(ratios[0], n);
    series.val_end = boundary_index(ratios[0] + ratios[1], n);
    if (!(series.train_end > 0 && series.train_end < series.val_end && series.val_end < n))
        fail("split: degenerate split for series of length " + std::to_string(n));
    return series;
}

WindowSet::WindowSet(const SeriesDataset* series, std::vector<std::size_t> origins,
                     std::size_t lookback, std::size_t horizon)
    : series_(series), origins_(std::move(origins)), lookback_(lookback), horizon_(horizon) {}

WindowPair WindowSet::operator[](std::size_t i) const {
    const std::size_t o = origins_[i];
    WindowPair w;
    w.origin = o;
    w.input.assign(series_->values.begin() + o, series_->values.begin() + o + lookback_);
    w.target.assign(series_->values.begin() + o + lookback_,
                    series_->values.begin() + o + lookback_ + horizon_);
    return w;
}

void WindowSet::gather(const std::vector<std::size_t>& idx, Matrix& inputs,
                       Matrix& targets) const {
    inputs = Matrix(idx.size(), lookback_);
    targets = Matrix(idx.size(), horizon_);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const std::size_t o = origins_[idx[k]];
        const double* src = series_->values.data() + o;
        double* in = inputs.row_ptr(k);
        double* tg = targets.row_ptr(k);
        for (std::size_t j = 0; j < lookback_; ++j) in[j] = src[j];
        for (std::size_t j = 0; j < horizon_; ++j) tg[j] = src[lookback_ + j];
    }
}

WindowSet windows(const SeriesDataset& series, Part part, std::size_t lookback,
                  std::size_t horizon, std::size_t stride) {
    if (stride < 1) fail("windows: stride must be >= 1");
    if (lookback < 1 || horizon < 1) fail("windows: lookback and horizon must be >= 1");
    std::size_t begin = 0, end = 0;
    switch (part) {
        case Part::train: begin = 0; end = series.train_end; break;
        case Part::val: begin = series.train_end; end = series.val_end; break;
        case Part::test: begin = series.val_end; end = series.size(); break;
    }
    const std::size_t part_len = end - begin;
    const std::size_t need = lookback + horizon;
    if (part_len < need) {
        std::ostringstream msg;
        msg << "windows: partition holds " << part_len << " points but lookback+horizon = "
            << need;
        fail(msg.str());
    }
    std::vector<std::size_t> origins;
    origins.reserve((part_len - need) / stride + 1);
    for (std::size_t o = begin; o + need <= end; o += stride) origins.push_back(o);
    return WindowSet(&series, std::move(origins), lookback, horizon);
}

double redundancy(std::size_t lookback, std::size_t patch_size) {
    if (patch_size < 1 || patch_size > lookback)
        fail("redundancy: patch size must satisfy 1 <= S <= L");
    return 1.0 - static_cast<double>(patch_size) / static_cast<double>(lookback);
}

void write_series_csv(const SeriesDataset& series, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "t,value\n";
    for (std::size_t t = 0; t < series.size(); ++t)
        out << t << "," << format_double(series.values[t]) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

SeriesDataset read_series_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(in, line) || (line != "t,value" && line != "t,value\r"))
        throw std::runtime_error("bad series CSV header in " + path.string());
    SeriesDataset ds;
    ds.name = path.stem().string();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 2)
            throw std::runtime_error("bad series CSV row in " + path.string());
        ds.values.push_back(std::stod(fields[1]));
    }
    return ds;
}

}  // namespace kunet
