#include "core/tridiag.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pdedpc {

std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                      std::span<const double> upper, std::span<const double> rhs) {
    const std::size_t n = diag.size();
    if (n == 0) throw std::runtime_error("solve_tridiagonal: empty system");
    if (lower.size() != n - 1 || upper.size() != n - 1 || rhs.size() != n)
        throw std::runtime_error("solve_tridiagonal: band sizes inconsistent with n=" +
                                 std::to_string(n));

    std::vector<double> c_prime(n - 1, 0.0);
    std::vector<double> d_prime(n, 0.0);

    double pivot = diag[0];
    if (pivot == 0.0 || !std::isfinite(pivot))
        throw std::runtime_error("solve_tridiagonal: singular system (zero pivot at row 0)");
    if (n > 1) c_prime[0] = upper[0] / pivot;
    d_prime[0] = rhs[0] / pivot;

    for (std::size_t i = 1; i < n; ++i) {
        pivot = diag[i] - lower[i - 1] * c_prime[i - 1];
        if (pivot == 0.0 || !std::isfinite(pivot))
            throw std::runtime_error("solve_tridiagonal: singular system (zero pivot at row " +
                                     std::to_string(i) + ")");
        if (i < n - 1) c_prime[i] = upper[i] / pivot;
        d_prime[i] = (rhs[i] - lower[i - 1] * d_prime[i - 1]) / pivot;
    }

    std::vector<double> x(n);
    x[n - 1] = d_prime[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d_prime[i] - c_prime[i] * x[i + 1];
    return x;
}

}  // namespace pdedpc
