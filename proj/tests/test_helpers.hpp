#pragma once

#include <cmath>
#include <functional>
#include <vector>

namespace pdedpc::testing {

// Central finite differences on a scalar function of a flat parameter
// vector. The function must rebuild its computation from scratch per call.
inline std::vector<double> central_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
    double h = 1e-5) {
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = f(x);
        x[i] = x0 - h;
        const double fm = f(x);
        x[i] = x0;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b,
                          double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

}  // namespace pdedpc::testing
