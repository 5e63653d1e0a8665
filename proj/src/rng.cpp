#include "kunet/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace kunet {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : state_(seed) {
    // Two mixing rounds decorrelate (seed, stream) pairs from plain seeds.
    std::uint64_t s = seed;
    state_ = splitmix64(s) ^ (stream * 0xD6E8FEB86659FD93ULL);
    state_ = splitmix64(state_);
}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t Rng::next_below(std::size_t n) {
    if (n == 0) throw std::invalid_argument("next_below: n must be positive");
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

double Rng::next_normal(double mean, double stddev) {
    if (stddev < 0.0) throw std::invalid_argument("next_normal: stddev must be >= 0");
    if (has_spare_) {
        has_spare_ = false;
        return mean + stddev * spare_;
    }
    // Box-Muller; u1 shifted into (0, 1] so log() stays finite.
    const double u1 =
        (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * r * std::cos(theta);
}

Matrix Rng::normal_matrix(std::size_t rows, std::size_t cols, double mean, double stddev) {
    Matrix m(rows, cols);
    for (double& x : m.data) x = next_normal(mean, stddev);
    return m;
}

}  // namespace kunet
