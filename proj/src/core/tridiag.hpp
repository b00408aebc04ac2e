#pragma once

#include <span>
#include <vector>

namespace pdedpc {

// Thomas algorithm for A x = rhs with A tridiagonal. lower/upper have n-1
// entries. Throws on a (near-)zero pivot.
std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                      std::span<const double> upper, std::span<const double> rhs);

}  // namespace pdedpc
