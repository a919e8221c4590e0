// SPDX-License-Identifier: Apache-2.0
//
// Counter-based deterministic RNG. A draw is a pure function of (seed,
// counter), so streams can be checkpointed by storing two integers and
// resumed exactly. Not cryptographic; statistical quality is what matters.

#pragma once

#include <cmath>
#include <cstdint>

#include "tensor.hpp"

namespace vsr {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct RngState {
    uint64_t seed = 0;
    uint64_t counter = 0;
};

class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_{seed, 0} {}
    explicit Rng(RngState s) : state_(s) {}

    RngState state() const { return state_; }
    void set_state(RngState s) { state_ = s; }

    // Derive an independent stream, advancing this one by a single draw.
    Rng fork() { return Rng(next_u64() ^ 0xD1B54A32D192ED03ULL); }

    uint64_t next_u64() { return splitmix64(state_.seed + 0x632BE59BD9B4E019ULL * ++state_.counter); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [lo, hi] inclusive
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    // standard normal via Box-Muller; two fresh uniforms per draw
    double normal() {
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    template <class T>
    TensorT<T> randn(std::vector<int> shape, double stddev = 1.0) {
        TensorT<T> t(std::move(shape));
        for (auto& v : t.data) v = static_cast<T>(stddev * normal());
        return t;
    }

    template <class T>
    TensorT<T> rand_uniform(std::vector<int> shape, double lo = 0.0, double hi = 1.0) {
        TensorT<T> t(std::move(shape));
        for (auto& v : t.data) v = static_cast<T>(uniform(lo, hi));
        return t;
    }

private:
    RngState state_;
};

}  // namespace vsr
