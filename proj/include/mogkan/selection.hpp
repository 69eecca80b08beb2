#pragma once

#include <vector>

#include "mogkan/matrix.hpp"

namespace mogkan {

struct Standardization {
    std::vector<double> means;
    // Sample (n-1) standard deviation; 0 marks a zero-variance column that
    // was centered but not divided.
    std::vector<double> stds;
};

// Transforms each column to mean 0 / sample std 1 and returns the applied
// statistics. Requires at least two rows.
std::pair<Matrix, Standardization> standardize(const Matrix& matrix);

// Applies previously computed statistics (train/test consistency).
Matrix apply_standardization(const Matrix& matrix, const Standardization& stats);

// Two-sided Welch t-test per feature between the two groups encoded in
// binary labels (0/1), keeping features with p < p_threshold. A threshold
// >= 1 keeps everything (p-values never exceed 1). Stand-in for the
// count-model differential filters this pipeline slot usually runs.
std::vector<int> welch_filter(const Matrix& matrix, const std::vector<int>& group_labels,
                              double p_threshold);

// Two-sided p-value for a Student-t statistic with the given degrees of
// freedom, via the regularized incomplete beta function.
double student_t_two_sided_p(double t, double dof);

struct LassoProblem {
    Matrix x;                // n x p
    std::vector<double> y;   // n
    double lambda = 0.0;
};

struct LassoResult {
    std::vector<double> beta;
    bool converged = false;
    int sweeps = 0;
};

// Minimizes  sum_i (y_i - x_i . beta)^2 + lambda * sum_j |beta_j|
// (no 1/(2n) factor) by cyclic coordinate descent with the soft-threshold
// update, sweeping coordinates in ascending order from a zero start. Stops
// when the largest coefficient change in a sweep is < tol. Non-convergence
// is reported through the flag, not an error.
LassoResult lasso_fit(const LassoProblem& problem, double tol = 1e-10, int max_iter = 10000);

// Indices with |beta_j| > 0 after the fit.
std::vector<int> lasso_select(const Matrix& x, const std::vector<double>& y, double lambda,
                              double tol = 1e-10, int max_iter = 10000);

// Objective value of the exact lasso form above (used by the KKT/oracle
// tests and exposed for reporting).
double lasso_objective(const Matrix& x, const std::vector<double>& y, double lambda,
                       const std::vector<double>& beta);

}  // namespace mogkan
