#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace kunet {

/// Dense row-major matrix of 64-bit floats. The single numeric carrier for
/// activations, parameters and gradients throughout the project.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Matrix identity(std::size_t n);
    static Matrix from_rows(const std::vector<std::vector<double>>& values);

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row_ptr(std::size_t i) { return data.data() + i * cols; }
    const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
    std::string shape_str() const;

    void fill(double v);
    bool all_finite() const;

    /// Reinterprets the row-major buffer under a new (rows, cols) split.
    /// Total element count must be unchanged; the data is not moved.
    Matrix reshaped(std::size_t r, std::size_t c) const&;
    Matrix reshaped(std::size_t r, std::size_t c) &&;
};

enum class ElemOp { add, sub, mul };

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix elementwise(const Matrix& a, const Matrix& b, ElemOp op);
Matrix scale(const Matrix& a, double c);

/// a += b, shapes must match. Used for gradient accumulation.
void add_inplace(Matrix& a, const Matrix& b);
/// a += c*b, shapes must match.
void axpy_inplace(Matrix& a, double c, const Matrix& b);

/// Column sums as a 1 x cols matrix (bias gradients).
Matrix column_sums(const Matrix& a);

double mean_abs(const Matrix& a);
double max_abs(const Matrix& a);

}  // namespace kunet
