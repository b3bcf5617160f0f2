#pragma once

#include <cstddef>
#include <vector>

#include "dpsinkhorn/errors.hpp"

namespace dpsinkhorn {

// Dense row-major matrix of doubles. Deliberately minimal: the toolkit's
// kernels (cost matrices, Sinkhorn updates, gradients, MLP layers) own their
// loops, so this is storage plus bounds-checked construction, not a linear
// algebra library.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(size_t rows, size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) return Matrix();
        Matrix m(rows.size(), rows[0].size());
        for (size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != m.cols_)
                throw ValidationError("Matrix::from_rows: ragged input");
            for (size_t j = 0; j < m.cols_; ++j) m(i, j) = rows[i][j];
        }
        return m;
    }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double& operator()(size_t i, size_t j) { return v_[i * cols_ + j]; }
    double operator()(size_t i, size_t j) const { return v_[i * cols_ + j]; }

    double* row(size_t i) { return v_.data() + i * cols_; }
    const double* row(size_t i) const { return v_.data() + i * cols_; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && v_ == o.v_;
    }

private:
    size_t rows_, cols_;
    std::vector<double> v_;
};

using Vector = std::vector<double>;

}  // namespace dpsinkhorn
