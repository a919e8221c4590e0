// SPDX-License-Identifier: Apache-2.0
//
// Shared test utilities: random projections for reducing vector-valued
// ops to scalars, and small wrappers for gradient checks.

#pragma once

#include <vsr/vsr.hpp>

namespace vsrtest {

using vsr::Tensor;
using vsr::Tensor64;

inline Tensor64 rand_proj(const std::vector<int>& shape, vsr::Rng& rng) {
    return rng.randn<double>(shape);
}

// max |a-b| over all elements of two same-shaped float tensors
inline double linf(const Tensor& a, const Tensor& b) { return vsr::max_abs_diff(a, b); }

inline bool bit_equal(const Tensor& a, const Tensor& b) {
    if (!(a.shape == b.shape)) return false;
    for (size_t i = 0; i < a.data.size(); ++i) {
        if (a.data[i] != b.data[i]) return false;
    }
    return true;
}

}  // namespace vsrtest
