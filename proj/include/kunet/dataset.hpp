#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kunet/matrix.hpp"
#include "kunet/rng.hpp"

namespace kunet {

enum class DatasetKind { ds1, ds2, ds3 };

const char* to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(const std::string& name);

/// Univariate series plus split boundaries. Partitions are
/// [0, train_end), [train_end, val_end), [val_end, size).
struct SeriesDataset {
    std::vector<double> values;
    std::string name;
    std::size_t train_end = 0;
    std::size_t val_end = 0;

    std::size_t size() const { return values.size(); }
};

enum class Part { train, val, test };

/// One (input, target) pair. input covers [origin, origin + L),
/// target covers [origin + L, origin + L + T) of the source series.
struct WindowPair {
    std::vector<double> input;
    std::vector<double> target;
    std::size_t origin = 0;
};

/// Lazily materialized sliding windows over one partition: only origins are
/// stored; inputs/targets are copied out on access.
class WindowSet {
  public:
    WindowSet() = default;
    WindowSet(const SeriesDataset* series, std::vector<std::size_t> origins,
              std::size_t lookback, std::size_t horizon);

    std::size_t size() const { return origins_.size(); }
    bool empty() const { return origins_.empty(); }
    std::size_t lookback() const { return lookback_; }
    std::size_t horizon() const { return horizon_; }
    const std::vector<std::size_t>& origins() const { return origins_; }

    WindowPair operator[](std::size_t i) const;

    /// Rows `rows[k]` of (inputs, targets) are the window at origins[idx[k]].
    void gather(const std::vector<std::size_t>& idx, Matrix& inputs, Matrix& targets) const;

  private:
    const SeriesDataset* series_ = nullptr;
    std::vector<std::size_t> origins_;
    std::size_t lookback_ = 0;
    std::size_t horizon_ = 0;
};

// Closed forms behind the three synthetic benchmarks. All are sums of five
// sines over a base period of 512 steps:
//   ds1: sum_k sin(2*pi*f_k*t/512),                 f = {1,2,4,8,16}
//   ds2: sum_k sin(2*pi*f_k*t/512 + k*pi/5)
//   ds3: sin(2*pi*t/(8*512)) * sum_k (1/k)*sin(2*pi*f_k*t/512 + k*pi/5)
inline constexpr double kBasePeriod = 512.0;
inline constexpr std::array<double, 5> kFrequencies = {1.0, 2.0, 4.0, 8.0, 16.0};

double series_value(DatasetKind kind, std::size_t t);

/// Deterministic synthetic series of length n. The closed forms take no
/// noise, so the generator is a pure function of (kind, n); rng is accepted
/// to keep stochastic call sites uniformly seeded.
SeriesDataset generate(DatasetKind kind, std::size_t n, Rng& rng);

/// Sets split boundaries from cumulative ratios (floor arithmetic).
/// Ratios must be positive and sum to 1 within 1e-9; each partition must be
/// nonempty.
SeriesDataset split(SeriesDataset series, const std::array<double, 3>& ratios);

/// All windows of the given partition, strided by `stride`. Throws if the
/// partition holds fewer than lookback + horizon points.
WindowSet windows(const SeriesDataset& series, Part part, std::size_t lookback,
                  std::size_t horizon, std::size_t stride);

/// Fraction of a sliding window shared with its stride-S neighbor: 1 - S/L.
double redundancy(std::size_t lookback, std::size_t patch_size);

/// CSV with header "t,value", one row per step, shortest round-trip doubles.
void write_series_csv(const SeriesDataset& series, const std::filesystem::path& path);
SeriesDataset read_series_csv(const std::filesystem::path& path);

}  // namespace kunet
