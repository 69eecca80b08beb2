#pragma once

#include <cstddef>
#include <vector>

namespace mogkan {

// Uniform B-spline knot layout shared by every univariate function in a
// layer. For G intervals and degree k the knot vector has G + 2k + 1 entries
// (k uniform extensions beyond each end) and carries G + k basis functions.
struct SplineGrid {
    double range_min = 0.0;
    double range_max = 0.0;
    int num_intervals = 0;  // G
    int degree = 0;         // k
    std::vector<double> knots;

    int num_basis() const { return num_intervals + degree; }
};

SplineGrid make_grid(double range_min, double range_max, int num_intervals, int degree);

// B_j(x) for j = 0..G+k-1 via the Cox-de Boor recursion on the extended
// knots. Inside [range_min, range_max] the values are non-negative, sum to 1
// and at most degree+1 are nonzero. Outside the range the recursion is
// evaluated as-is (no clamping); beyond the extended knots all values are 0.
std::vector<double> basis_values(const SplineGrid& grid, double x);

// dB_j/dx. Requires degree >= 1. On an interior knot the value is the
// one-sided right derivative (the recursion uses half-open intervals).
std::vector<double> basis_derivatives(const SplineGrid& grid, double x);

// Fixed residual base activation s(x) = x / (1 + e^-x) and its derivative.
double silu(double x);
double silu_derivative(double x);

// One learnable univariate function:
//   phi(x) = base_weight * silu(x) + spline_weight * sum_j coeffs[j] * B_j(x)
double evaluate_univariate(const SplineGrid& grid, double base_weight, double spline_weight,
                           const std::vector<double>& coeffs, double x);

}  // namespace mogkan
