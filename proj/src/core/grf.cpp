#include "core/grf.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "core/rng.hpp"

namespace pdedpc {

void GrfConfig::validate() const {
    if (!(length_scale > 0.0)) throw std::runtime_error("GrfConfig: length_scale must be > 0");
    if (!(variance > 0.0)) throw std::runtime_error("GrfConfig: variance must be > 0");
    if (jitter >= 0.0 && jitter > 1e-6 * variance)
        throw std::runtime_error("GrfConfig: jitter exceeds 1e-6 * variance");
}

std::vector<double> rbf_kernel_matrix(const GrfConfig& cfg, const Grid1D& grid) {
    cfg.validate();
    if (grid.n_x < 2) throw std::runtime_error("rbf_kernel_matrix: grid needs >= 2 points");
    const int n = grid.n_x;
    const double inv2l2 = 1.0 / (2.0 * cfg.length_scale * cfg.length_scale);
    std::vector<double> k(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double v = 0.0;
            if (cfg.periodic_kernel) {
                // Sum of images of the line kernel; exact to well below
                // machine precision for length scales <= 0.5.
                for (int m = -3; m <= 3; ++m) {
                    const double d = grid.x[i] - grid.x[j] + m;
                    v += cfg.variance * std::exp(-d * d * inv2l2);
                }
            } else {
                const double d = grid.x[i] - grid.x[j];
                v = cfg.variance * std::exp(-d * d * inv2l2);
            }
            k[static_cast<std::size_t>(i) * n + j] = v;
            k[static_cast<std::size_t>(j) * n + i] = v;
        }
    }
    return k;
}

namespace {

// In-place lower Cholesky of the row-major matrix; returns false on failure.
bool cholesky_lower(std::vector<double>& a, int n) {
    for (int j = 0; j < n; ++j) {
        double d = a[static_cast<std::size_t>(j) * n + j];
        for (int k = 0; k < j; ++k) {
            const double v = a[static_cast<std::size_t>(j) * n + k];
            d -= v * v;
        }
        if (!(d > 0.0)) return false;
        const double ljj = std::sqrt(d);
        a[static_cast<std::size_t>(j) * n + j] = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = a[static_cast<std::size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                s -= a[static_cast<std::size_t>(i) * n + k] * a[static_cast<std::size_t>(j) * n + k];
            a[static_cast<std::size_t>(i) * n + j] = s / ljj;
        }
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) a[static_cast<std::size_t>(i) * n + j] = 0.0;
    return true;
}

}  // namespace

GrfSampler::GrfSampler(const GrfConfig& cfg, const Grid1D& grid) : n_(grid.n_x) {
    const std::vector<double> kernel = rbf_kernel_matrix(cfg, grid);
    double jitter = cfg.effective_jitter();
    for (int attempt = 0; attempt <= 8; ++attempt) {
        chol_ = kernel;
        for (int i = 0; i < n_; ++i) chol_[static_cast<std::size_t>(i) * n_ + i] += jitter;
        if (cholesky_lower(chol_, n_)) {
            jitter_used_ = jitter;
            return;
        }
        jitter = jitter > 0.0 ? jitter * 2.0 : 1e-12 * cfg.variance;
    }
    throw std::runtime_error(
        "GrfSampler: Cholesky failed after jitter escalation (length scale " +
        std::to_string(cfg.length_scale) + " too small for this grid?)");
}

Field GrfSampler::sample(std::uint64_t seed) const {
    Rng rng(seed);
    std::vector<double> z(static_cast<std::size_t>(n_));
    for (auto& v : z) v = rng.normal();
    Field out(static_cast<std::size_t>(n_), 0.0);
    for (int i = 0; i < n_; ++i) {
        const double* row = chol_.data() + static_cast<std::size_t>(i) * n_;
        double acc = 0.0;
        for (int j = 0; j <= i; ++j) acc += row[j] * z[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

void taper_endpoints(Field& field, const Grid1D& grid, double width) {
    for (int i = 0; i < grid.n_x; ++i) {
        const double x = grid.x[static_cast<std::size_t>(i)];
        const double d = std::min(x, 1.0 - x) / width;
        if (d < 1.0) {
            const double s = d <= 0.0 ? 0.0 : d * d * (3.0 - 2.0 * d);
            field[static_cast<std::size_t>(i)] *= s;
        }
    }
}

}  // namespace pdedpc
