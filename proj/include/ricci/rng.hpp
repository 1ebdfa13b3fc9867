#ifndef RICCI_RNG_HPP
#define RICCI_RNG_HPP

#include "ricci/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace ricci {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Per-replica stream: the state depends only on (seed, stream ids), never on scheduling.
/// Uniform and normal draws are computed here so streams are identical across standard libraries.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
        : engine_(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL) ^
                             splitmix64(substream + 0x2545F4914F6CDD1DULL))) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal by Box-Muller; always consumes exactly two engine outputs.
    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// Uniform point of the unit ball: normalized Gaussian direction, radius U^{1/d}.
inline Eigen::VectorXd sample_uniform_ball(int dim, Rng& rng) {
    if (dim < 1) throw std::invalid_argument("sample_uniform_ball: dim must be positive");
    Eigen::VectorXd g(dim);
    double n2 = 0.0;
    do {
        for (int i = 0; i < dim; ++i) g(i) = rng.normal();
        n2 = g.squaredNorm();
    } while (n2 == 0.0);
    const double r = std::pow(rng.uniform(), 1.0 / dim);
    return (r / std::sqrt(n2)) * g;
}

}  // namespace ricci

#endif
