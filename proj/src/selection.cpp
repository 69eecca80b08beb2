#include "mogkan/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mogkan {

std::pair<Matrix, Standardization> standardize(const Matrix& matrix) {
    const std::size_t n = matrix.rows();
    const std::size_t p = matrix.cols();
    if (n < 2) throw std::invalid_argument("too-few-rows: standardize needs >= 2 rows");
    Standardization stats;
    stats.means.resize(p);
    stats.stds.resize(p);
    Matrix out(n, p);
    for (std::size_t j = 0; j < p; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += matrix(i, j);
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = matrix(i, j) - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        stats.means[j] = mean;
        stats.stds[j] = sd;
        for (std::size_t i = 0; i < n; ++i) {
            const double centered = matrix(i, j) - mean;
            out(i, j) = sd > 0.0 ? centered / sd : centered;
        }
    }
    return {std::move(out), std::move(stats)};
}

Matrix apply_standardization(const Matrix& matrix, const Standardization& stats) {
    if (matrix.cols() != stats.means.size()) {
        throw std::invalid_argument("shape-mismatch: standardization width differs");
    }
    Matrix out(matrix.rows(), matrix.cols());
    for (std::size_t j = 0; j < matrix.cols(); ++j) {
        const double sd = stats.stds[j];
        for (std::size_t i = 0; i < matrix.rows(); ++i) {
            const double centered = matrix(i, j) - stats.means[j];
            out(i, j) = sd > 0.0 ? centered / sd : centered;
        }
    }
    return out;
}

namespace {

// Regularized incomplete beta I_x(a,b): series/continued-fraction split at
// the symmetry point, continued fraction by the modified Lentz method.
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

double regularized_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_two_sided_p(double t, double dof) {
    if (!std::isfinite(t)) return 0.0;
    if (t == 0.0) return 1.0;
    // P(|T| > t) = I_{dof/(dof+t^2)}(dof/2, 1/2)
    const double x = dof / (dof + t * t);
    return regularized_incomplete_beta(dof / 2.0, 0.5, x);
}

std::vector<int> welch_filter(const Matrix& matrix, const std::vector<int>& group_labels,
                              double p_threshold) {
    if (group_labels.size() != matrix.rows()) {
        throw std::invalid_argument("shape-mismatch: one group label per row required");
    }
    std::vector<std::size_t> group_a, group_b;
    for (std::size_t i = 0; i < group_labels.size(); ++i) {
        if (group_labels[i] == 0) {
            group_a.push_back(i);
        } else if (group_labels[i] == 1) {
            group_b.push_back(i);
        } else {
            throw std::invalid_argument("degenerate-groups: labels must be 0 or 1");
        }
    }
    if (group_a.size() < 2 || group_b.size() < 2) {
        throw std::invalid_argument("degenerate-groups: both groups need >= 2 samples");
    }
    auto moments = [&](const std::vector<std::size_t>& rows, std::size_t j) {
        double mean = 0.0;
        for (std::size_t i : rows) mean += matrix(i, j);
        mean /= static_cast<double>(rows.size());
        double ss = 0.0;
        for (std::size_t i : rows) {
            const double d = matrix(i, j) - mean;
            ss += d * d;
        }
        return std::pair<double, double>(mean, ss / static_cast<double>(rows.size() - 1));
    };
    std::vector<int> selected;
    for (std::size_t j = 0; j < matrix.cols(); ++j) {
        if (p_threshold >= 1.0) {  // p <= 1 always; no filtering
            selected.push_back(static_cast<int>(j));
            continue;
        }
        auto [mean_a, var_a] = moments(group_a, j);
        auto [mean_b, var_b] = moments(group_b, j);
        const double na = static_cast<double>(group_a.size());
        const double nb = static_cast<double>(group_b.size());
        const double se2 = var_a / na + var_b / nb;
        double p;
        if (se2 == 0.0) {
            p = mean_a == mean_b ? 1.0 : 0.0;
        } else {
            const double t = (mean_a - mean_b) / std::sqrt(se2);
            const double dof = se2 * se2 /
                               ((var_a / na) * (var_a / na) / (na - 1.0) +
                                (var_b / nb) * (var_b / nb) / (nb - 1.0));
            p = student_t_two_sided_p(t, dof);
        }
        if (p < p_threshold) selected.push_back(static_cast<int>(j));
    }
    return selected;
}

double lasso_objective(const Matrix& x, const std::vector<double>& y, double lambda,
                       const std::vector<double>& beta) {
    double obj = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double pred = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) pred += x(i, j) * beta[j];
        const double r = y[i] - pred;
        obj += r * r;
    }
    for (double b : beta) obj += lambda * std::fabs(b);
    return obj;
}

LassoResult lasso_fit(const LassoProblem& problem, double tol, int max_iter) {
    if (!(tol > 0.0)) throw std::invalid_argument("invalid-size: tol must be > 0");
    if (problem.lambda < 0.0) throw std::invalid_argument("invalid-size: lambda must be >= 0");
    const Matrix& x = problem.x;
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    if (problem.y.size() != n) {
        throw std::invalid_argument("shape-mismatch: y length must equal row count");
    }
    std::vector<double> col_sq(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) col_sq[j] += x(i, j) * x(i, j);
    }
    LassoResult result;
    result.beta.assign(p, 0.0);
    std::vector<double> residual = problem.y;  // r = y - X beta, beta = 0
    for (int sweep = 0; sweep < max_iter; ++sweep) {
        double max_change = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (col_sq[j] == 0.0) continue;
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += x(i, j) * residual[i];
            // rho = 2 X_j . (r + X_j beta_j); minimizer is the soft threshold
            // S(rho, lambda) / (2 ||X_j||^2).
            const double rho = 2.0 * (dot + col_sq[j] * result.beta[j]);
            double next = 0.0;
            if (rho > problem.lambda) {
                next = (rho - problem.lambda) / (2.0 * col_sq[j]);
            } else if (rho < -problem.lambda) {
                next = (rho + problem.lambda) / (2.0 * col_sq[j]);
            }
            const double change = next - result.beta[j];
            if (change != 0.0) {
                for (std::size_t i = 0; i < n; ++i) residual[i] -= change * x(i, j);
                result.beta[j] = next;
            }
            max_change = std::max(max_change, std::fabs(change));
        }
        result.sweeps = sweep + 1;
        if (max_change < tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

std::vector<int> lasso_select(const Matrix& x, const std::vector<double>& y, double lambda,
                              double tol, int max_iter) {
    LassoProblem problem{x, y, lambda};
    const LassoResult result = lasso_fit(problem, tol, max_iter);
    std::vector<int> selected;
    for (std::size_t j = 0; j < result.beta.size(); ++j) {
        if (std::fabs(result.beta[j]) > 0.0) selected.push_back(static_cast<int>(j));
    }
    return selected;
}

}  // namespace mogkan
