#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace shelvesim {

// Deterministic, platform-independent RNG. std::<random> distributions are
// implementation-defined, which breaks the byte-for-byte reproducibility
// contract, so all samplers here are spelled out explicitly.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        // splitmix64 expansion of the seed into the xoshiro256** state
        uint64_t x = seed;
        for (auto& s : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1], safe for log()
    double uniform_pos() { return 1.0 - uniform(); }

    double exponential(double mean) { return -mean * std::log(uniform_pos()); }

    double normal(double mu = 0.0, double sigma = 1.0) {
        // Box-Muller, no caching so the draw count per call is fixed
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return mu + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    uint64_t poisson(double mean) {
        if (mean < 0.0) throw std::domain_error("poisson: negative mean");
        if (mean == 0.0) return 0;
        uint64_t total = 0;
        // split large means so Knuth's product method stays in range
        while (mean > 30.0) {
            const double half = mean * 0.5;
            total += poisson_knuth(half);
            mean -= half;
        }
        return total + poisson_knuth(mean);
    }

    // Gamma(shape, scale) for integer shape (Erlang); used by the EM-gain model
    double gamma_int(uint64_t shape, double scale) {
        if (shape == 0) return 0.0;
        if (shape <= 64) {
            double log_sum = 0.0;
            for (uint64_t i = 0; i < shape; ++i) log_sum += std::log(uniform_pos());
            return -scale * log_sum;
        }
        return gamma_mt(static_cast<double>(shape)) * scale;
    }

    // index into a normalized weight vector
    size_t discrete(std::span<const double> weights) {
        const double u = uniform();
        double acc = 0.0;
        for (size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t poisson_knuth(double mean) {
        const double limit = std::exp(-mean);
        uint64_t n = 0;
        double prod = uniform_pos();
        while (prod > limit) {
            ++n;
            prod *= uniform_pos();
        }
        return n;
    }

    // Marsaglia-Tsang, shape >= 1
    double gamma_mt(double shape) {
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
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
        }
    }

    uint64_t state_[4];
};

// Per-trial seed derivation: results must not depend on execution order or
// thread count, so every trial gets an independently mixed seed.
inline uint64_t derive_seed(uint64_t master, uint64_t index, uint64_t stream = 0) {
    uint64_t z = master ^ (0x9e3779b97f4a7c15ULL * (index + 1)) ^ (0xd1342543de82ef95ULL * (stream + 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace shelvesim
