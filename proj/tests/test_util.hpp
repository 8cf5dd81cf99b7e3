#pragma once

#include <cmath>
#include <functional>

#include "gpda/autodiff.hpp"
#include "gpda/common.hpp"

namespace testutil {

inline gpda::Mat random_mat(gpda::Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
    gpda::Mat m(r, c);
    for (double& x : m.a) x = rng.uniform(lo, hi);
    return m;
}

/// Entries in [lo, hi] but kept at least `margin` away from zero, so central
/// differences do not straddle a rectifier kink.
inline gpda::Mat random_mat_off_zero(gpda::Rng& rng, int r, int c, double margin = 1e-2) {
    gpda::Mat m(r, c);
    for (double& x : m.a) {
        do {
            x = rng.uniform(-1.0, 1.0);
        } while (std::abs(x) < margin);
    }
    return m;
}

/// Central finite differences of a scalar-valued function w.r.t. one
/// parameter tensor; eval() must recompute the value from current parameters.
inline gpda::Mat fd_grad(const gpda::ad::Tensor& param, const std::function<double()>& eval,
                         double eps = 1e-5) {
    gpda::Mat g(param.rows(), param.cols());
    gpda::Mat& v = const_cast<gpda::ad::Tensor&>(param).value();
    for (std::size_t i = 0; i < v.a.size(); ++i) {
        const double orig = v.a[i];
        v.a[i] = orig + eps;
        const double up = eval();
        v.a[i] = orig - eps;
        const double down = eval();
        v.a[i] = orig;
        g.a[i] = (up - down) / (2.0 * eps);
    }
    return g;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_rel_err(const gpda::Mat& a, const gpda::Mat& b, double floor = 1e-4) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.a.size(); ++i) {
        const double denom = std::max({std::abs(a.a[i]), std::abs(b.a[i]), floor});
        worst = std::max(worst, std::abs(a.a[i] - b.a[i]) / denom);
    }
    return worst;
}

}  // namespace testutil
