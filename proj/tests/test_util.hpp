#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mogkan/kan.hpp"
#include "mogkan/matrix.hpp"
#include "mogkan/rng.hpp"

namespace testutil {

inline mogkan::Matrix random_matrix(std::size_t rows, std::size_t cols, mogkan::Rng& rng,
                                    double lo = -1.0, double hi = 1.0) {
    mogkan::Matrix m(rows, cols);
    for (auto& v : m.data()) v = rng.uniform(lo, hi);
    return m;
}

// Central finite differences over every entry reachable through the views.
// `loss` must be a pure function of the current parameter values.
struct GradCheckStats {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

// The denominator floor reflects what central differences can resolve at
// h = 1e-5 on an O(1) loss: entries below it are compared at that absolute
// scale (1e-10 for the 1e-4 tolerance) instead of amplifying FD round-off.
inline GradCheckStats finite_diff_check(const std::vector<mogkan::ParamView>& views,
                                        const std::vector<double>& analytic,
                                        const std::function<double()>& loss, double h = 1e-5,
                                        double tol_denom = 1e-6) {
    GradCheckStats stats;
    std::size_t offset = 0;
    for (const auto& view : views) {
        for (std::size_t i = 0; i < view.size; ++i) {
            double& p = view.values[i];
            const double saved = p;
            p = saved + h;
            const double hi = loss();
            p = saved - h;
            const double lo = loss();
            p = saved;
            const double fd = (hi - lo) / (2.0 * h);
            const double a = analytic[offset + i];
            const double denom = std::max({std::fabs(fd), std::fabs(a), tol_denom});
            const double rel = std::fabs(fd - a) / denom;
            stats.max_rel_err = std::max(stats.max_rel_err, rel);
            ++stats.checked;
        }
        offset += view.size;
    }
    return stats;
}

}  // namespace testutil
