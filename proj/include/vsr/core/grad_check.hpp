// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference gradient verification. The oracle side only
// ever evaluates the scalar forward function, so it stays independent of
// whatever analytic backward path it is checking. Runs in double.

#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace vsr {

struct GradCheckReport {
    struct Entry {
        std::string input;
        double rel_err = 0;
    };
    std::vector<Entry> entries;
    double tol = 0;
    bool pass = false;

    std::string summary() const {
        std::ostringstream os;
        os << (pass ? "PASS" : "FAIL") << " (tol " << tol << ")";
        for (const auto& e : entries) os << "  " << e.input << ": " << e.rel_err;
        return os.str();
    }
};

using GradCheckValueFn = std::function<double(const std::vector<Tensor64>&)>;
using GradCheckGradFn = std::function<std::vector<Tensor64>(const std::vector<Tensor64>&)>;

// Relative error between analytic and finite-difference gradients of one
// input, normalized by the larger gradient magnitude (with a floor so
// exact-zero gradients compare clean).
inline double gradient_rel_err(const Tensor64& analytic, const Tensor64& fd) {
    const double scale = std::max({max_abs(analytic), max_abs(fd), 1e-8});
    return max_abs_diff(analytic, fd) / scale;
}

inline GradCheckReport grad_check(const GradCheckValueFn& value_fn, const GradCheckGradFn& grad_fn,
                                  std::vector<std::pair<std::string, Tensor64>> inputs, double tol,
                                  double step = 1e-3) {
    GradCheckReport report;
    report.tol = tol;

    std::vector<Tensor64> xs;
    xs.reserve(inputs.size());
    for (auto& [name, t] : inputs) xs.push_back(t);

    std::vector<Tensor64> analytic = grad_fn(xs);
    require(analytic.size() == xs.size(), "grad_check: analytic gradient count mismatch");
    for (size_t i = 0; i < analytic.size(); ++i) {
        if (!analytic[i].all_finite())
            throw std::runtime_error("grad_check: non-finite analytic gradient for input '" + inputs[i].first + "'");
    }

    report.pass = true;
    for (size_t i = 0; i < xs.size(); ++i) {
        Tensor64 fd(xs[i].shape);
        for (long long e = 0; e < xs[i].numel(); ++e) {
            const double orig = xs[i][e];
            xs[i][e] = orig + step;
            const double fp = value_fn(xs);
            xs[i][e] = orig - step;
            const double fm = value_fn(xs);
            xs[i][e] = orig;
            fd[e] = (fp - fm) / (2.0 * step);
        }
        const double err = gradient_rel_err(analytic[i], fd);
        report.entries.push_back({inputs[i].first, err});
        if (err > tol) report.pass = false;
    }
    return report;
}

}  // namespace vsr
