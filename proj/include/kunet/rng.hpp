#pragma once

#include <cstdint>
#include <vector>

#include "kunet/matrix.hpp"

namespace kunet {

/// Deterministic seeded generator (SplitMix64 core, Box-Muller normals).
/// Hand-rolled so the stream is bit-identical across platforms; the standard
/// library's distributions are implementation-defined and would break the
/// byte-identical rerun contract.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Independent stream derived from (seed, stream). Used to give each
    /// concern (init, shuffling, ...) its own decorrelated sequence.
    Rng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53-bit resolution.
    double next_double();

    /// Uniform in [0, n). n must be > 0.
    std::size_t next_below(std::size_t n);

    double next_normal(double mean, double stddev);

    /// rows x cols matrix of i.i.d. Normal(mean, stddev^2) draws. stddev >= 0.
    Matrix normal_matrix(std::size_t rows, std::size_t cols, double mean, double stddev);

    /// Seeded Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace kunet
