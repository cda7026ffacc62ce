#ifndef LC2ST_CORE_RNG_HPP
#define LC2ST_CORE_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "lc2st/core/types.hpp"

namespace lc2st {

/// SplitMix64 finalizer. Used for seed derivation only.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Order-sensitive combination of several 64-bit keys into one seed.
constexpr std::uint64_t hash_seed(std::uint64_t a, std::uint64_t b) noexcept {
    return mix64(mix64(a) ^ (b + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2)));
}

template <typename... Rest>
constexpr std::uint64_t hash_seed(std::uint64_t a, std::uint64_t b, Rest... rest) noexcept {
    return hash_seed(hash_seed(a, b), static_cast<std::uint64_t>(rest)...);
}

/**
 * Reproducible random stream identified by (seed, stream_id).
 *
 * Generator: xoshiro256** whose 256-bit state is filled by four successive
 * SplitMix64 outputs started at hash_seed(seed, stream_id). Uniform doubles
 * take the top 53 bits; normals use the Box-Muller transform (both values of
 * a pair are consumed in order); bounded integers use rejection on the top
 * bits. None of this goes through <random> distributions, whose outputs are
 * implementation-defined, so sequences agree across standard libraries.
 *
 * A stream is owned by one worker. Use child() to fork independent
 * sub-streams for parallel work.
 */
class RngStream {
public:
    using result_type = std::uint64_t;

    explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0)
        : seed_(seed), stream_id_(stream_id) {
        std::uint64_t x = hash_seed(seed, stream_id);
        for (auto& word : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            word = z ^ (z >> 31);
        }
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// Independent stream keyed by this stream's identity and `id`; does not
    /// consume draws from this stream.
    RngStream child(std::uint64_t id) const { return RngStream(hash_seed(seed_, stream_id_), id); }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return next(); }

    std::uint64_t next() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] keeps the log finite.
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) noexcept {
        if (n <= 1) {
            return 0;
        }
        const std::uint64_t limit = max() - (max() % n + 1) % n;
        std::uint64_t r = next();
        while (r > limit) {
            r = next();
        }
        return r % n;
    }

    /// n x cols matrix of independent standard normals, filled row by row.
    Matrix normal_matrix(Eigen::Index n, Eigen::Index cols) {
        Matrix out(n, cols);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) {
                out(i, j) = normal();
            }
        }
        return out;
    }

    /// Fisher-Yates.
    template <typename T>
    void shuffle(std::span<T> values) noexcept {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(values[i - 1], values[j]);
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& values) noexcept {
        shuffle(std::span<T>(values));
    }

    /// Random permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) {
            idx[i] = i;
        }
        shuffle(idx);
        return idx;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace lc2st

#endif
