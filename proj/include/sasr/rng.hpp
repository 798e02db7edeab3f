#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace sasr {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Named substreams derived from one run seed. Each subsystem owns its own
/// stream so that, e.g., toggling reward shaping cannot perturb action
/// sampling or environment resets.
enum class RngStream : uint64_t {
    NetInit = 1,
    Env = 2,
    Action = 3,
    Replay = 4,
    UpdateNoise = 5,
    Retention = 6,
    BetaSampling = 7,
    Projector = 8,
    Eval = 9,
};

/// Seedable 64-bit generator (mt19937_64) with the distribution transforms
/// used across the project. All transforms are implemented here so that a
/// seed reproduces the same sequence on any standard library.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    static Rng stream(uint64_t base_seed, RngStream id) {
        return Rng(splitmix64(splitmix64(base_seed) ^ splitmix64(static_cast<uint64_t>(id))));
    }

    uint64_t next_u64() { return gen_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1); safe as a log() argument.
    double uniform_pos() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    /// Standard normal via Box-Muller (no cached spare, keeps state minimal).
    double normal() {
        double u1 = uniform_pos();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Gamma(shape, 1) for real shape > 0, Marsaglia-Tsang squeeze method.
    double gamma(double shape) {
        if (!(shape > 0.0)) {
            throw std::invalid_argument("Rng::gamma: shape must be positive");
        }
        if (shape < 1.0) {
            double u = uniform_pos();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_pos();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Standard Cauchy.
    double cauchy() { return std::tan(M_PI * (uniform_pos() - 0.5)); }

    /// Laplace(0, 1) via inverse CDF.
    double laplace() {
        double u = uniform_pos() - 0.5;
        return (u < 0.0 ? 1.0 : -1.0) * std::log(1.0 - 2.0 * std::abs(u));
    }

    /// Uniform index in [0, n).
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>((static_cast<__uint128_t>(gen_()) * n) >> 64);
    }

    /// Engine state as text (mt19937_64 stream format), for checkpoints.
    std::string state_string() const {
        std::ostringstream os;
        os << gen_;
        return os.str();
    }

    void set_state_string(const std::string& s) {
        std::istringstream is(s);
        is >> gen_;
        if (!is) throw std::runtime_error("Rng: malformed state string");
    }

    bool operator==(const Rng& other) const { return gen_ == other.gen_; }

private:
    std::mt19937_64 gen_;
};

}  // namespace sasr
