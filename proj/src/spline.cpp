#include "mogkan/spline.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mogkan {

SplineGrid make_grid(double range_min, double range_max, int num_intervals, int degree) {
    if (!(range_min < range_max)) {
        throw std::invalid_argument("invalid-range: range_min must be < range_max");
    }
    if (num_intervals < 1) {
        throw std::invalid_argument("invalid-size: num_intervals must be >= 1");
    }
    if (degree < 0) {
        throw std::invalid_argument("invalid-size: degree must be >= 0");
    }
    SplineGrid grid;
    grid.range_min = range_min;
    grid.range_max = range_max;
    grid.num_intervals = num_intervals;
    grid.degree = degree;
    const double spacing = (range_max - range_min) / num_intervals;
    const int count = num_intervals + 2 * degree + 1;
    grid.knots.resize(count);
    for (int i = 0; i < count; ++i) {
        grid.knots[i] = range_min + (i - degree) * spacing;
    }
    return grid;
}

namespace {

// Degree-0 indicators over every extended-knot interval: half-open
// [t_j, t_{j+1}), with the final interval closed on the right.
std::vector<double> degree0_values(const SplineGrid& grid, double x) {
    const int n = static_cast<int>(grid.knots.size()) - 1;
    std::vector<double> v(n, 0.0);
    for (int j = 0; j < n; ++j) {
        bool in = (j + 1 == n) ? (x >= grid.knots[j] && x <= grid.knots[j + 1])
                               : (x >= grid.knots[j] && x < grid.knots[j + 1]);
        if (in) {
            v[j] = 1.0;
            break;
        }
    }
    return v;
}

// One Cox-de Boor elevation step: degree d-1 values -> degree d values.
void elevate(const SplineGrid& grid, double x, int d, std::vector<double>& v) {
    const int out = static_cast<int>(v.size()) - 1;
    for (int j = 0; j < out; ++j) {
        double left = 0.0, right = 0.0;
        double den_l = grid.knots[j + d] - grid.knots[j];
        if (den_l > 0.0) left = (x - grid.knots[j]) / den_l * v[j];
        double den_r = grid.knots[j + d + 1] - grid.knots[j + 1];
        if (den_r > 0.0) right = (grid.knots[j + d + 1] - x) / den_r * v[j + 1];
        v[j] = left + right;
    }
    v.resize(out);
}

void check_finite(double x) {
    if (!std::isfinite(x)) {
        throw std::invalid_argument("non-finite-input: x must be finite");
    }
}

}  // namespace

std::vector<double> basis_values(const SplineGrid& grid, double x) {
    check_finite(x);
    std::vector<double> v = degree0_values(grid, x);
    for (int d = 1; d <= grid.degree; ++d) elevate(grid, x, d, v);
    return v;
}

std::vector<double> basis_derivatives(const SplineGrid& grid, double x) {
    check_finite(x);
    const int k = grid.degree;
    if (k < 1) {
        throw std::invalid_argument("unsupported-degree: derivatives need degree >= 1");
    }
    // Values one degree down, then the standard derivative identity
    //   B'_{j,k} = k * (B_{j,k-1}/(t_{j+k}-t_j) - B_{j+1,k-1}/(t_{j+k+1}-t_{j+1}))
    std::vector<double> lower = degree0_values(grid, x);
    for (int d = 1; d <= k - 1; ++d) elevate(grid, x, d, lower);
    const int n = grid.num_basis();
    std::vector<double> deriv(n, 0.0);
    for (int j = 0; j < n; ++j) {
        double a = 0.0, b = 0.0;
        double den_a = grid.knots[j + k] - grid.knots[j];
        if (den_a > 0.0) a = lower[j] / den_a;
        double den_b = grid.knots[j + k + 1] - grid.knots[j + 1];
        if (den_b > 0.0) b = lower[j + 1] / den_b;
        deriv[j] = k * (a - b);
    }
    return deriv;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_derivative(double x) {
    double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

double evaluate_univariate(const SplineGrid& grid, double base_weight, double spline_weight,
                           const std::vector<double>& coeffs, double x) {
    if (static_cast<int>(coeffs.size()) != grid.num_basis()) {
        throw std::invalid_argument("length-mismatch: coeffs length must be " +
                                    std::to_string(grid.num_basis()));
    }
    std::vector<double> basis = basis_values(grid, x);
    double spline = 0.0;
    for (std::size_t j = 0; j < coeffs.size(); ++j) spline += coeffs[j] * basis[j];
    return base_weight * silu(x) + spline_weight * spline;
}

}  // namespace mogkan
