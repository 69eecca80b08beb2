#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mogkan {

// Dense row-major matrix of doubles. Deliberately minimal: the models in
// this library index explicitly, so no expression templates or BLAS hooks.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

    void fill(double v) { data_.assign(data_.size(), v); }

    static void check_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                            const std::string& what) {
        if (m.rows() != rows || m.cols() != cols) {
            throw std::invalid_argument("shape-mismatch: " + what + " expected " +
                                        std::to_string(rows) + "x" + std::to_string(cols) +
                                        ", got " + std::to_string(m.rows()) + "x" +
                                        std::to_string(m.cols()));
        }
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace mogkan
