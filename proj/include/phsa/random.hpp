#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "phsa/matrix.hpp"

namespace phsa {

/// Seeded generator whose derived draws are bit-identical across standard
/// libraries. std::mt19937_64's raw output is fully specified; the
/// distributions are not, so the transforms are done here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    /// Uniform integer in [0, n); n > 0.
    std::size_t below(std::size_t n);
    /// Uniform integer in [lo, hi].
    std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
    /// Standard normal via Box-Muller (no cached spare, so draws are stateless).
    double normal();

    Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi);
    Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0);
    /// Uniform in ±√(6 / (fan_in + fan_out)), shaped fan_in×fan_out.
    Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out);

private:
    std::mt19937_64 engine_;
};

/// Mixes a seed with a stream index so that independent streams never share state.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace phsa
