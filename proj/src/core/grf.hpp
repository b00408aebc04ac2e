#pragma once

#include <cstdint>
#include <vector>

#include "core/grid.hpp"

namespace pdedpc {

struct GrfConfig {
    double length_scale = 0.4;
    double variance = 4.0;
    double jitter = -1.0;  // < 0 means the default 1e-10 * variance
    // Wrap the kernel around the unit circle (sum of shifted RBF images) so
    // sampled fields are continuous across the periodic seam.
    bool periodic_kernel = false;

    double effective_jitter() const { return jitter < 0.0 ? 1e-10 * variance : jitter; }
    void validate() const;
};

// k(x,x') = variance * exp(-(x-x')^2 / (2 l^2)), without jitter.
std::vector<double> rbf_kernel_matrix(const GrfConfig& cfg, const Grid1D& grid);

// Zero-mean GP sampler; factorizes once, samples many times. Cholesky failure
// doubles the jitter up to 8 times before giving up.
class GrfSampler {
public:
    GrfSampler(const GrfConfig& cfg, const Grid1D& grid);

    Field sample(std::uint64_t seed) const;

    const std::vector<double>& cholesky_factor() const { return chol_; }
    double jitter_used() const { return jitter_used_; }
    int n() const { return n_; }

private:
    int n_;
    std::vector<double> chol_;  // lower triangular, row-major n x n
    double jitter_used_;
};

// Smoothstep ramp to zero within `width` of each endpoint; used when sampled
// initial conditions must respect homogeneous Dirichlet boundaries.
void taper_endpoints(Field& field, const Grid1D& grid, double width = 0.1);

}  // namespace pdedpc
